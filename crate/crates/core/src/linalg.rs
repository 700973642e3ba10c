//! Dense vector helpers and a compressed-row sparse matrix.
//!
//! All reductions run sequentially in index order so that results are
//! bitwise reproducible for a given input.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

/// Parameter vectors, gradients and directions are plain `Vec<f64>`.
pub type DenseVector = Vec<f64>;

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn norm1(a: &[f64]) -> f64 {
    a.iter().map(|v| v.abs()).sum()
}

pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// `a - b`
pub fn sub(a: &[f64], b: &[f64]) -> DenseVector {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// `a + s * b`
pub fn add_scaled(a: &[f64], s: f64, b: &[f64]) -> DenseVector {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x + s * y).collect()
}

/// `y += s * x` in place.
pub fn axpy(y: &mut [f64], s: f64, x: &[f64]) {
    debug_assert_eq!(y.len(), x.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += s * xi;
    }
}

pub fn all_finite(a: &[f64]) -> bool {
    a.iter().all(|v| v.is_finite())
}

/// Row-sparse matrix in compressed row storage with strictly increasing
/// column indices inside each row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseRowMatrix {
    n_rows: usize,
    n_cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseRowMatrix {
    pub fn empty(n_cols: usize) -> Self {
        Self {
            n_rows: 0,
            n_cols,
            row_ptr: vec![0],
            col_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    /// Builds a matrix from per-row `(column, value)` lists. Entries within a
    /// row may arrive in any order but column indices must be distinct.
    pub fn from_rows<R>(n_cols: usize, rows: R) -> Result<Self>
    where
        R: IntoIterator<Item = Vec<(usize, f64)>>,
    {
        let mut m = Self::empty(n_cols);
        for row in rows {
            m.push_row(row)?;
        }
        Ok(m)
    }

    /// Builds a matrix from a dense row-major slice, dropping exact zeros.
    pub fn from_dense(n_rows: usize, n_cols: usize, dense: &[f64]) -> Result<Self> {
        check_dim(n_rows * n_cols, dense.len())?;
        Self::from_rows(
            n_cols,
            dense.chunks(n_cols.max(1)).take(n_rows).map(|r| {
                r.iter()
                    .enumerate()
                    .filter(|(_, v)| **v != 0.0)
                    .map(|(j, v)| (j, *v))
                    .collect()
            }),
        )
        .map(|mut m| {
            // n_cols == 0 leaves no chunks to iterate
            while m.n_rows < n_rows {
                m.row_ptr.push(m.col_idx.len());
                m.n_rows += 1;
            }
            m
        })
    }

    pub fn push_row(&mut self, mut row: Vec<(usize, f64)>) -> Result<()> {
        row.sort_by_key(|e| e.0);
        for w in row.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(Error::InvalidMatrix(format!(
                    "duplicate column {} in row {}",
                    w[0].0, self.n_rows
                )));
            }
        }
        for &(j, v) in &row {
            if j >= self.n_cols {
                return Err(Error::InvalidMatrix(format!(
                    "column {j} out of range for {} columns",
                    self.n_cols
                )));
            }
            if !v.is_finite() {
                return Err(Error::NonFinite("sparse matrix entry"));
            }
            self.col_idx.push(j);
            self.values.push(v);
        }
        self.row_ptr.push(self.col_idx.len());
        self.n_rows += 1;
        Ok(())
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Column indices and values of row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (lo, hi) = (self.row_ptr[i], self.row_ptr[i + 1]);
        (&self.col_idx[lo..hi], &self.values[lo..hi])
    }

    pub fn rows(&self) -> impl Iterator<Item = (&[usize], &[f64])> + '_ {
        (0..self.n_rows).map(move |i| self.row(i))
    }

    /// Returns a copy with the column count widened to `n_cols`.
    pub fn with_n_cols(&self, n_cols: usize) -> Result<Self> {
        if n_cols < self.n_cols && self.col_idx.iter().any(|&j| j >= n_cols) {
            return Err(Error::InvalidMatrix(format!(
                "cannot shrink to {n_cols} columns"
            )));
        }
        Ok(Self {
            n_cols,
            ..self.clone()
        })
    }

    /// Appends a constant column (used for the intercept).
    pub fn with_constant_column(&self, value: f64) -> Self {
        let mut m = Self::empty(self.n_cols + 1);
        for (idx, vals) in self.rows() {
            let mut row: Vec<(usize, f64)> = idx.iter().copied().zip(vals.iter().copied()).collect();
            row.push((self.n_cols, value));
            m.push_row(row).expect("valid by construction");
        }
        m
    }

    /// Squared Euclidean norm of each row.
    pub fn row_sq_norms(&self) -> Vec<f64> {
        self.rows().map(|(_, v)| dot(v, v)).collect()
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.n_rows * self.n_cols];
        for (i, (idx, vals)) in self.rows().enumerate() {
            for (&j, &v) in idx.iter().zip(vals) {
                out[i * self.n_cols + j] = v;
            }
        }
        out
    }
}

/// `M x`
pub fn spmv(m: &SparseRowMatrix, x: &[f64]) -> Result<DenseVector> {
    check_dim(m.n_cols, x.len())?;
    Ok(m
        .rows()
        .map(|(idx, vals)| idx.iter().zip(vals).map(|(&j, &v)| v * x[j]).sum())
        .collect())
}

/// `M^T r`, accumulated row by row in index order.
pub fn spmv_transpose(m: &SparseRowMatrix, r: &[f64]) -> Result<DenseVector> {
    check_dim(m.n_rows, r.len())?;
    let mut out = vec![0.0; m.n_cols];
    for ((idx, vals), &ri) in m.rows().zip(r) {
        if ri == 0.0 {
            continue;
        }
        for (&j, &v) in idx.iter().zip(vals) {
            out[j] += v * ri;
        }
    }
    Ok(out)
}

/// A feature matrix with optional `{-1, +1}` labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub features: SparseRowMatrix,
    pub labels: Vec<i8>,
}

impl Dataset {
    pub fn new(features: SparseRowMatrix, labels: Vec<i8>) -> Result<Self> {
        if !labels.is_empty() {
            check_dim(features.n_rows(), labels.len())?;
        }
        if labels.iter().any(|&y| y != 1 && y != -1) {
            return Err(Error::InvalidParameter("labels must be -1 or +1".into()));
        }
        Ok(Self { features, labels })
    }

    pub fn unlabeled(features: SparseRowMatrix) -> Self {
        Self {
            features,
            labels: Vec::new(),
        }
    }

    pub fn empty(n_cols: usize) -> Self {
        Self::unlabeled(SparseRowMatrix::empty(n_cols))
    }

    pub fn without_labels(&self) -> Self {
        Self::unlabeled(self.features.clone())
    }

    pub fn n_rows(&self) -> usize {
        self.features.n_rows()
    }

    pub fn n_cols(&self) -> usize {
        self.features.n_cols()
    }

    pub fn is_labeled(&self) -> bool {
        !self.labels.is_empty() || self.n_rows() == 0
    }

    /// Classification rate in percent of `sign(a^T x)` (ties predict +1).
    pub fn accuracy(&self, x: &[f64]) -> Result<f64> {
        if self.labels.is_empty() {
            return Ok(0.0);
        }
        let margins = spmv(&self.features, x)?;
        let correct = margins
            .iter()
            .zip(&self.labels)
            .filter(|(m, &y)| if **m >= 0.0 { y == 1 } else { y == -1 })
            .count();
        Ok(100.0 * correct as f64 / self.labels.len() as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn dense_mul(d: &[f64], rows: usize, cols: usize, x: &[f64]) -> Vec<f64> {
        (0..rows)
            .map(|i| (0..cols).map(|j| d[i * cols + j] * x[j]).sum())
            .collect()
    }

    fn dense_mul_t(d: &[f64], rows: usize, cols: usize, r: &[f64]) -> Vec<f64> {
        (0..cols)
            .map(|j| (0..rows).map(|i| d[i * cols + j] * r[i]).sum())
            .collect()
    }

    #[test]
    fn identity_and_single_entry() {
        let eye = SparseRowMatrix::from_rows(2, vec![vec![(0, 1.0)], vec![(1, 1.0)]]).unwrap();
        assert_eq!(spmv(&eye, &[3.0, -1.0]).unwrap(), vec![3.0, -1.0]);
        assert_eq!(spmv_transpose(&eye, &[3.0, -1.0]).unwrap(), vec![3.0, -1.0]);

        let m = SparseRowMatrix::from_rows(2, vec![vec![(1, 2.0)], vec![]]).unwrap();
        assert_eq!(spmv(&m, &[0.0, 5.0]).unwrap(), vec![10.0, 0.0]);
        assert_eq!(spmv_transpose(&m, &[3.0, 0.0]).unwrap(), vec![0.0, 6.0]);
    }

    #[test]
    fn dimension_errors() {
        let m = SparseRowMatrix::from_rows(3, vec![vec![(0, 1.0)]]).unwrap();
        assert!(matches!(
            spmv(&m, &[1.0]),
            Err(Error::DimensionMismatch { expected: 3, found: 1 })
        ));
        assert!(spmv_transpose(&m, &[1.0, 2.0]).is_err());
        assert!(SparseRowMatrix::from_rows(2, vec![vec![(2, 1.0)]]).is_err());
        assert!(SparseRowMatrix::from_rows(2, vec![vec![(1, 1.0), (1, 2.0)]]).is_err());
        assert!(SparseRowMatrix::from_rows(2, vec![vec![(1, f64::NAN)]]).is_err());
    }

    #[test]
    fn unsorted_input_is_sorted() {
        let m = SparseRowMatrix::from_rows(4, vec![vec![(3, 1.0), (0, 2.0)]]).unwrap();
        assert_eq!(m.row(0).0, &[0, 3]);
    }

    #[test]
    fn random_5x4_matches_dense() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let d: Vec<f64> = (0..20)
                .map(|_| if rng.random::<f64>() < 0.5 { 0.0 } else { rng.random_range(-2.0..2.0) })
                .collect();
            let m = SparseRowMatrix::from_dense(5, 4, &d).unwrap();
            let x: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
            let r: Vec<f64> = (0..5).map(|_| rng.random_range(-1.0..1.0)).collect();
            let got = spmv(&m, &x).unwrap();
            for (a, b) in got.iter().zip(dense_mul(&d, 5, 4, &x)) {
                assert!((a - b).abs() <= 1e-14);
            }
            let got_t = spmv_transpose(&m, &r).unwrap();
            for (a, b) in got_t.iter().zip(dense_mul_t(&d, 5, 4, &r)) {
                assert!((a - b).abs() <= 1e-14);
            }
        }
    }

    #[test]
    fn transpose_of_unit_vector_is_row() {
        let d = [1.0, 0.0, -2.0, 0.0, 3.0, 0.5];
        let m = SparseRowMatrix::from_dense(2, 3, &d).unwrap();
        for i in 0..2 {
            let mut e = vec![0.0; 2];
            e[i] = 1.0;
            assert_eq!(spmv_transpose(&m, &e).unwrap(), d[i * 3..i * 3 + 3].to_vec());
        }
    }

    #[test]
    fn accuracy_ties_predict_positive() {
        let m = SparseRowMatrix::from_rows(1, vec![vec![(0, 1.0)], vec![(0, -1.0)], vec![]]).unwrap();
        let ds = Dataset::new(m, vec![1, -1, 1]).unwrap();
        assert_eq!(ds.accuracy(&[1.0]).unwrap(), 100.0);
        assert!((ds.accuracy(&[-1.0]).unwrap() - 100.0 / 3.0).abs() < 1e-12);
    }

    fn small_matrix() -> impl Strategy<Value = (usize, usize, Vec<f64>, Vec<f64>, Vec<f64>)> {
        (1usize..6, 1usize..6).prop_flat_map(|(r, c)| {
            (
                Just(r),
                Just(c),
                proptest::collection::vec(
                    prop_oneof![Just(0.0), -3.0f64..3.0],
                    r * c,
                ),
                proptest::collection::vec(-2.0f64..2.0, c),
                proptest::collection::vec(-2.0f64..2.0, r),
            )
        })
    }

    proptest! {
        #[test]
        fn adjoint_identity((r, c, d, x, y) in small_matrix()) {
            let m = SparseRowMatrix::from_dense(r, c, &d).unwrap();
            let lhs = dot(&spmv(&m, &x).unwrap(), &y);
            let rhs = dot(&x, &spmv_transpose(&m, &y).unwrap());
            let scale = lhs.abs().max(rhs.abs()).max(1.0);
            prop_assert!((lhs - rhs).abs() <= 1e-12 * scale);
        }
    }
}
