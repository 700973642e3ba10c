//! libsvm I/O, feature standardization, splitting and the synthetic toy generator.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Dataset, SparseRowMatrix};

/// Smallest per-feature scale; features with smaller spread pass through unscaled.
pub const SCALE_FLOOR: f64 = 1e-12;

fn parse_err(path: &Path, line: usize, reason: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        reason: reason.into(),
    }
}

/// Read a libsvm file. The column count is the largest index seen.
pub fn read_libsvm(path: impl AsRef<Path>) -> Result<Dataset> {
    read_libsvm_impl(path.as_ref(), None)
}

/// Read a libsvm file into exactly `n_cols` columns, dropping features beyond it.
pub fn read_libsvm_with_dim(path: impl AsRef<Path>, n_cols: usize) -> Result<Dataset> {
    read_libsvm_impl(path.as_ref(), Some(n_cols))
}

fn read_libsvm_impl(path: &Path, n_cols: Option<usize>) -> Result<Dataset> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_libsvm(&text, path, n_cols)
}

/// Parse libsvm text; `path` is only used in error messages.
pub fn parse_libsvm(text: &str, path: &Path, n_cols: Option<usize>) -> Result<Dataset> {
    let mut raw_labels = Vec::new();
    let mut rows = Vec::new();
    let mut max_col = 0usize;
    for (lineno, line) in text.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line.split('#').next().unwrap_or("").replace('\u{2212}', "-");
        let mut tokens = line.split_whitespace();
        let Some(label_tok) = tokens.next() else { continue };
        let label: f64 = label_tok
            .parse()
            .map_err(|_| parse_err(path, lineno, format!("bad label {label_tok:?}")))?;
        if label != 1.0 && label != -1.0 && label != 0.0 {
            return Err(parse_err(path, lineno, format!("label {label_tok:?} is not -1, 0 or 1")));
        }
        let mut row = Vec::new();
        for tok in tokens {
            let (idx, val) = tok
                .split_once(':')
                .ok_or_else(|| parse_err(path, lineno, format!("expected idx:value, got {tok:?}")))?;
            let idx: usize = idx
                .parse()
                .map_err(|_| parse_err(path, lineno, format!("bad index {idx:?}")))?;
            if idx == 0 {
                return Err(parse_err(path, lineno, "indices are 1-based"));
            }
            let val: f64 = val
                .parse()
                .map_err(|_| parse_err(path, lineno, format!("bad value {val:?}")))?;
            if !val.is_finite() {
                return Err(parse_err(path, lineno, format!("non-finite value {val}")));
            }
            if row.iter().any(|&(j, _)| j == idx - 1) {
                return Err(parse_err(path, lineno, format!("duplicate index {idx}")));
            }
            match n_cols {
                Some(n) if idx > n => continue,
                _ => {}
            }
            max_col = max_col.max(idx);
            row.push((idx - 1, val));
        }
        raw_labels.push((label as i8, lineno));
        rows.push(row);
    }

    let alphabet: BTreeSet<i8> = raw_labels.iter().map(|&(y, _)| y).collect();
    let zero_one = alphabet.contains(&0);
    if zero_one && alphabet.contains(&-1) {
        return Err(Error::LabelAlphabet {
            path: path.to_path_buf(),
            labels: alphabet.iter().map(|y| y.to_string()).collect(),
        });
    }
    let labels = raw_labels
        .into_iter()
        .map(|(y, _)| if zero_one && y == 0 { -1 } else { y })
        .collect();
    let features = SparseRowMatrix::from_rows(n_cols.unwrap_or(max_col), rows)?;
    Dataset::new(features, labels)
}

/// Format a dataset as libsvm text. Values use shortest round-trip formatting,
/// so reading the output back reproduces every value exactly.
pub fn format_libsvm(data: &Dataset) -> String {
    let mut out = String::new();
    for (i, (cols, vals)) in data.features.rows().enumerate() {
        let label = data.labels.get(i).copied().unwrap_or(0);
        out.push_str(if label > 0 { "+1" } else if label < 0 { "-1" } else { "0" });
        for (j, v) in cols.iter().zip(vals) {
            let _ = write!(out, " {}:{:?}", j + 1, v);
        }
        out.push('\n');
    }
    out
}

pub fn write_libsvm(data: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, format_libsvm(data)).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Per-feature affine map `(x - mean) / scale` fitted on training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
    /// When false, `apply` only rescales and keeps the sparsity pattern.
    pub center: bool,
}

impl Standardizer {
    /// Population mean and standard deviation per column, absent entries counting as 0.
    pub fn fit(train: &Dataset, center: bool) -> Result<Self> {
        let n = train.n_rows();
        if n == 0 {
            return Err(Error::InvalidParameter("cannot standardize an empty training set".into()));
        }
        let d = train.n_cols();
        let mut sum = vec![0.0; d];
        for (cols, vals) in train.features.rows() {
            for (&j, &v) in cols.iter().zip(vals) {
                sum[j] += v;
            }
        }
        let mean: Vec<f64> = sum.iter().map(|s| s / n as f64).collect();
        // two-pass variance; implicit zeros contribute mean^2 each
        let mut sq = vec![0.0; d];
        let mut present = vec![0usize; d];
        for (cols, vals) in train.features.rows() {
            for (&j, &v) in cols.iter().zip(vals) {
                sq[j] += (v - mean[j]).powi(2);
                present[j] += 1;
            }
        }
        let scale = (0..d)
            .map(|j| {
                let var = (sq[j] + (n - present[j]) as f64 * mean[j] * mean[j]) / n as f64;
                let sd = var.sqrt();
                if sd > SCALE_FLOOR {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Ok(Self { mean, scale, center })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Transform a dataset. With centering, rows become dense except for
    /// entries that are exactly zero after the shift.
    pub fn apply(&self, data: &Dataset) -> Result<Dataset> {
        let d = self.dim();
        let data_cols = data.n_cols();
        if data_cols > d {
            return Err(Error::DimensionMismatch { expected: d, found: data_cols });
        }
        let mut rows = Vec::with_capacity(data.n_rows());
        let mut dense = vec![0.0; d];
        for (cols, vals) in data.features.rows() {
            let row: Vec<(usize, f64)> = if self.center {
                dense.iter_mut().for_each(|v| *v = 0.0);
                for (&j, &v) in cols.iter().zip(vals) {
                    dense[j] = v;
                }
                dense
                    .iter()
                    .enumerate()
                    .map(|(j, &v)| (j, (v - self.mean[j]) / self.scale[j]))
                    .filter(|&(_, v)| v != 0.0)
                    .collect()
            } else {
                cols.iter().zip(vals).map(|(&j, &v)| (j, v / self.scale[j])).collect()
            };
            rows.push(row);
        }
        let features = SparseRowMatrix::from_rows(d, rows)?;
        Dataset::new(features, data.labels.clone())
    }
}

/// Fit on `train`, then transform `train` and every dataset in `others`.
pub fn fit_apply_standardizer(train: &Dataset, others: &[&Dataset], center: bool) -> Result<(Dataset, Vec<Dataset>, Standardizer)> {
    let st = Standardizer::fit(train, center)?;
    let train_t = st.apply(train)?;
    let others_t = others.iter().map(|o| st.apply(o)).collect::<Result<Vec<_>>>()?;
    Ok((train_t, others_t, st))
}

/// Shuffle rows with a seeded generator and split off `train_fraction` for training.
pub fn train_test_split(data: &Dataset, train_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(0.0..=1.0).contains(&train_fraction) {
        return Err(Error::InvalidParameter("train_fraction must lie in [0, 1]".into()));
    }
    let n = data.n_rows();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = (train_fraction * n as f64).round() as usize;
    let take = |ids: &[usize]| -> Result<Dataset> {
        let rows = ids.iter().map(|&i| {
            let (c, v) = data.features.row(i);
            c.iter().copied().zip(v.iter().copied()).collect::<Vec<_>>()
        });
        let features = SparseRowMatrix::from_rows(data.n_cols(), rows)?;
        let labels = if data.labels.is_empty() { Vec::new() } else { ids.iter().map(|&i| data.labels[i]).collect() };
        Dataset::new(features, labels)
    };
    Ok((take(&idx[..n_train])?, take(&idx[n_train..])?))
}

/// Two-class Gaussian toy problem: the first `t` features carry the signal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToySpec {
    pub d: usize,
    pub t: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub n_unlabeled: usize,
    pub seed: u64,
    /// Row-major `t x t` covariance of the relevant block; drawn from Wishart(I, t+1) when absent.
    pub covariance: Option<Vec<f64>>,
    /// Class mean of the relevant block; drawn uniformly from `{-1, +1}^t` when absent.
    pub mean: Option<Vec<f64>>,
}

impl ToySpec {
    pub fn new(d: usize, t: usize, n_train: usize, n_test: usize, n_unlabeled: usize, seed: u64) -> Self {
        Self {
            d,
            t,
            n_train,
            n_test,
            n_unlabeled,
            seed,
            covariance: None,
            mean: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ToyData {
    pub train: Dataset,
    pub test: Dataset,
    pub unlabeled: Dataset,
    pub mean: Vec<f64>,
    pub covariance: Vec<f64>,
}

fn cholesky(a: &[f64], n: usize) -> Result<Vec<f64>> {
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i * n + k] * l[j * n + k]).sum();
            if i == j {
                let v = a[i * n + i] - s;
                if !(v > 0.0) {
                    return Err(Error::InvalidParameter("covariance is not positive definite".into()));
                }
                l[i * n + j] = v.sqrt();
            } else {
                l[i * n + j] = (a[i * n + j] - s) / l[j * n + j];
            }
        }
    }
    Ok(l)
}

pub fn generate_toy(spec: &ToySpec) -> Result<ToyData> {
    let (d, t) = (spec.d, spec.t);
    if t > d {
        return Err(Error::InvalidParameter(format!("relevant dims t={t} exceed d={d}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let covariance = match &spec.covariance {
        Some(c) if c.len() == t * t => c.clone(),
        Some(c) => return Err(Error::DimensionMismatch { expected: t * t, found: c.len() }),
        None => {
            // G^T G with G a (t+1) x t standard normal matrix
            let g: Vec<f64> = (0..(t + 1) * t).map(|_| rng.sample(StandardNormal)).collect();
            let mut w = vec![0.0; t * t];
            for i in 0..t {
                for j in 0..t {
                    w[i * t + j] = (0..=t).map(|r| g[r * t + i] * g[r * t + j]).sum();
                }
            }
            w
        }
    };
    let mean = match &spec.mean {
        Some(m) if m.len() == t => m.clone(),
        Some(m) => return Err(Error::DimensionMismatch { expected: t, found: m.len() }),
        None => (0..t).map(|_| if rng.random_bool(0.5) { 1.0 } else { -1.0 }).collect(),
    };
    let chol = cholesky(&covariance, t)?;

    let draw = |n: usize, rng: &mut ChaCha8Rng| -> Result<Dataset> {
        let mut rows = Vec::with_capacity(n);
        let mut labels = Vec::with_capacity(n);
        for i in 0..n {
            let y: i8 = if i % 2 == 0 { 1 } else { -1 };
            let z: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
            let mut row = Vec::with_capacity(d);
            for a in 0..t {
                let noise: f64 = (0..=a).map(|b| chol[a * t + b] * z[b]).sum();
                row.push((a, f64::from(y) * mean[a] + noise));
            }
            row.extend((t..d).map(|j| (j, z[j])));
            row.retain(|&(_, v)| v != 0.0);
            rows.push(row);
            labels.push(y);
        }
        Dataset::new(SparseRowMatrix::from_rows(d, rows)?, labels)
    };
    let train = draw(spec.n_train, &mut rng)?;
    let test = draw(spec.n_test, &mut rng)?;
    let unlabeled = draw(spec.n_unlabeled, &mut rng)?.without_labels();
    Ok(ToyData {
        train,
        test,
        unlabeled,
        mean,
        covariance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn parse(text: &str) -> Result<Dataset> {
        parse_libsvm(text, Path::new("mem"), None)
    }

    #[test]
    fn parses_single_line() {
        let ds = parse("+1 1:0.5 3:-2\n").unwrap();
        assert_eq!(ds.labels, vec![1]);
        assert_eq!(ds.n_cols(), 3);
        assert_eq!(ds.features.row(0), (&[0usize, 2][..], &[0.5, -2.0][..]));
    }

    #[test]
    fn unicode_minus_and_comments() {
        let ds = parse("\u{2212}1 2:\u{2212}2 # note\n").unwrap();
        assert_eq!(ds.labels, vec![-1]);
        assert_eq!(ds.features.row(0).1, &[-2.0]);
    }

    #[test]
    fn empty_file_gives_empty_dataset() {
        let ds = parse("").unwrap();
        assert_eq!(ds.n_rows(), 0);
    }

    #[test]
    fn zero_one_labels_are_mapped() {
        let ds = parse("0 1:1\n1 1:2\n0\n").unwrap();
        assert_eq!(ds.labels, vec![-1, 1, -1]);
    }

    #[test]
    fn mixed_alphabet_is_rejected() {
        assert!(matches!(parse("0 1:1\n-1 1:2\n"), Err(Error::LabelAlphabet { .. })));
    }

    #[test]
    fn malformed_lines_report_line_number() {
        for (text, line) in [("+1 1:1\n+1 0:2\n", 2), ("+1 a:1\n", 1), ("+1 1:1\n\n+1 1:x\n", 3), ("2 1:1\n", 1)] {
            match parse(text) {
                Err(Error::Parse { line: l, .. }) => assert_eq!(l, line, "{text:?}"),
                other => panic!("expected parse error for {text:?}, got {other:?}"),
            }
        }
    }

    #[test]
    fn fixed_dim_drops_extra_features() {
        let ds = parse_libsvm("+1 1:1 5:2\n", Path::new("mem"), Some(3)).unwrap();
        assert_eq!(ds.n_cols(), 3);
        assert_eq!(ds.features.nnz(), 1);
    }

    #[test]
    fn missing_file_is_io_error() {
        assert!(matches!(read_libsvm("/nonexistent/file.svm"), Err(Error::Io { .. })));
    }

    #[test]
    fn standardizer_hand_example() {
        let features = SparseRowMatrix::from_rows(2, vec![vec![(0, 1.0), (1, 4.0)], vec![(0, 3.0), (1, 4.0)]]).unwrap();
        let ds = Dataset::new(features, vec![1, -1]).unwrap();
        let (t, _, st) = fit_apply_standardizer(&ds, &[], true).unwrap();
        assert_eq!(st.mean, vec![2.0, 4.0]);
        assert_eq!(st.scale, vec![1.0, 1.0]);
        assert_eq!(t.features.to_dense(), vec![-1.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn scale_only_keeps_pattern() {
        let features = SparseRowMatrix::from_rows(3, vec![vec![(0, 2.0)], vec![(2, 1.0)], vec![]]).unwrap();
        let ds = Dataset::unlabeled(features);
        let st = Standardizer::fit(&ds, false).unwrap();
        let t = st.apply(&ds).unwrap();
        assert_eq!(t.features.nnz(), 2);
        assert_eq!(st.scale[1], 1.0);
        let expected = 2.0 / st.scale[0];
        assert_eq!(t.features.row(0).1, &[expected]);
    }

    #[test]
    fn split_is_seeded_and_complete() {
        let toy = generate_toy(&ToySpec::new(4, 2, 50, 0, 0, 3)).unwrap();
        let (a, b) = train_test_split(&toy.train, 0.8, 11).unwrap();
        assert_eq!((a.n_rows(), b.n_rows()), (40, 10));
        let (a2, _) = train_test_split(&toy.train, 0.8, 11).unwrap();
        assert_eq!(a, a2);
    }

    #[test]
    fn toy_is_deterministic_and_balanced() {
        let spec = ToySpec::new(6, 3, 101, 20, 7, 42);
        let a = generate_toy(&spec).unwrap();
        let b = generate_toy(&spec).unwrap();
        assert_eq!(format_libsvm(&a.train), format_libsvm(&b.train));
        assert_eq!(a.unlabeled, b.unlabeled);
        let pos = a.train.labels.iter().filter(|&&y| y == 1).count();
        assert_eq!(pos, 51);
        assert!(a.unlabeled.labels.is_empty());
        assert_eq!(a.unlabeled.n_rows(), 7);
        assert!(generate_toy(&ToySpec::new(2, 3, 1, 1, 1, 0)).is_err());
    }

    #[test]
    fn toy_irrelevant_moments() {
        let toy = generate_toy(&ToySpec::new(8, 3, 5000, 0, 0, 5)).unwrap();
        let dense = toy.train.features.to_dense();
        let n = 5000.0;
        for j in 3..8 {
            let col: Vec<f64> = (0..5000).map(|i| dense[i * 8 + j]).collect();
            let m = col.iter().sum::<f64>() / n;
            let v = col.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n;
            assert!(m.abs() < 0.1 && (v - 1.0).abs() < 0.2, "col {j}: mean {m}, var {v}");
        }
    }

    #[test]
    fn toy_wishart_is_symmetric_pd() {
        let toy = generate_toy(&ToySpec::new(5, 5, 0, 0, 0, 9)).unwrap();
        let c = &toy.covariance;
        for i in 0..5 {
            for j in 0..5 {
                assert_eq!(c[i * 5 + j], c[j * 5 + i]);
            }
        }
        assert!(cholesky(c, 5).is_ok());
        assert!(toy.mean.iter().all(|m| m.abs() == 1.0));
    }

    fn dataset_strategy() -> impl Strategy<Value = Dataset> {
        (1usize..6, 0usize..6).prop_flat_map(|(d, n)| {
            let row = proptest::collection::btree_map(0..d, -1e6f64..1e6, 0..=d);
            (
                Just(d),
                proptest::collection::vec(row, n),
                proptest::collection::vec(prop_oneof![Just(1i8), Just(-1i8)], n),
            )
                .prop_map(|(d, rows, labels)| {
                    let rows = rows.into_iter().map(|r| r.into_iter().filter(|&(_, v)| v != 0.0).collect::<Vec<_>>());
                    Dataset::new(SparseRowMatrix::from_rows(d, rows).unwrap(), labels).unwrap()
                })
        })
    }

    proptest! {
        #[test]
        fn libsvm_round_trip(ds in dataset_strategy()) {
            let back = parse_libsvm(&format_libsvm(&ds), Path::new("mem"), Some(ds.n_cols())).unwrap();
            prop_assert_eq!(back, ds);
        }

        #[test]
        fn standardized_train_has_unit_moments(seed in 0u64..1000) {
            let toy = generate_toy(&ToySpec::new(4, 2, 30, 0, 0, seed)).unwrap();
            let st = Standardizer::fit(&toy.train, true).unwrap();
            let t = st.apply(&toy.train).unwrap();
            let dense = t.features.to_dense();
            for j in 0..4 {
                let m = (0..30).map(|i| dense[i * 4 + j]).sum::<f64>() / 30.0;
                let v = (0..30).map(|i| (dense[i * 4 + j] - m).powi(2)).sum::<f64>() / 30.0;
                prop_assert!(m.abs() <= 1e-12);
                prop_assert!((v - 1.0).abs() <= 1e-10);
            }
        }
    }
}
