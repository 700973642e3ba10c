//! Data preparation and solver dispatch.

use std::path::Path;
use std::time::Instant;

use dcprox::baselines::{dca_solve, gist_solve, proximal_gradient_solve, DcaConfig, GistConfig, ProxGradConfig};
use dcprox::data::{fit_apply_standardizer, generate_toy, read_libsvm, read_libsvm_with_dim, train_test_split, ToySpec};
use dcprox::inner::InnerConfig;
use dcprox::losses::{LogisticLoss, TransductiveLogisticLoss};
use dcprox::metric::ScaledIdentity;
use dcprox::prox_newton::{self, stationarity_check, OuterConfig};
use dcprox::regularizers::{CappedL1Penalty, L1Penalty};
use dcprox::{CompositeObjective, Dataset, DcNonsmooth, DcSmooth, DenseVector, SolveTrace};

use crate::error::CliError;
use crate::settings::{LossKind, PenaltyKind, Settings, SolverKind};

#[derive(Debug, Clone)]
pub struct Problem {
    pub name: String,
    pub train: Dataset,
    pub test: Option<Dataset>,
    pub unlabeled: Dataset,
    /// Index of the appended constant feature.
    pub intercept: Option<usize>,
}

pub fn toy_spec(s: &Settings, seed: u64) -> Result<ToySpec, CliError> {
    let d = s.toy_d.ok_or_else(|| CliError::Usage("--toy-d is required".into()))?;
    let t = s.toy_t.ok_or_else(|| CliError::Usage("--toy-t is required".into()))?;
    let n_train = s.toy_train.ok_or_else(|| CliError::Usage("--toy-train is required".into()))?;
    if t > d {
        return Err(CliError::Usage(format!("--toy-t ({t}) exceeds --toy-d ({d})")));
    }
    Ok(ToySpec::new(d, t, n_train, s.toy_test.unwrap_or(0), s.toy_unlabeled.unwrap_or(0), seed))
}

fn read_with_dim(path: &Path, dim: usize) -> Result<Dataset, CliError> {
    Ok(read_libsvm_with_dim(path, dim)?)
}

/// Loads (or generates) the data for one seed and standardizes it on the
/// training part. Toy data is always centred; file data is only scaled
/// unless `full_standardize` is set.
pub fn load_problem(s: &Settings, seed: u64, split_without_test: bool) -> Result<Problem, CliError> {
    let (name, train, test, unlabeled, center) = if s.uses_toy() {
        let spec = toy_spec(s, seed)?;
        let toy = generate_toy(&spec)?;
        let test = (spec.n_test > 0).then_some(toy.test);
        (format!("toy-d{}-t{}", spec.d, spec.t), toy.train, test, toy.unlabeled, true)
    } else {
        let path = s.train.as_deref().ok_or_else(|| CliError::Usage("--train (or --toy-d) is required".into()))?;
        let train = read_libsvm(path)?;
        let dim = train.n_cols();
        let test = s.test.as_deref().map(|p| read_with_dim(p, dim)).transpose()?;
        let unlabeled = match s.unlabeled.as_deref() {
            Some(p) => read_with_dim(p, dim)?.without_labels(),
            None => Dataset::empty(dim),
        };
        let (train, test) = match test {
            None if split_without_test => {
                let (a, b) = train_test_split(&train, 0.8, seed)?;
                (a, Some(b))
            }
            t => (train, t),
        };
        let name = path.file_stem().map_or_else(|| "data".to_string(), |s| s.to_string_lossy().into_owned());
        (name, train, test, unlabeled, s.full_standardize.unwrap_or(false))
    };
    if train.n_rows() == 0 {
        return Err(CliError::Usage("training set is empty".into()));
    }
    if !train.labels.iter().any(|&y| y > 0) || !train.labels.iter().any(|&y| y < 0) {
        eprintln!("warning: training set contains a single class");
    }

    let others: Vec<&Dataset> = test.iter().chain(std::iter::once(&unlabeled)).collect();
    let (mut train, mut transformed, _) = fit_apply_standardizer(&train, &others, center)?;
    let mut unlabeled = transformed.pop().expect("unlabeled set present");
    let mut test = transformed.pop();

    let mut intercept = None;
    if s.intercept.unwrap_or(false) {
        intercept = Some(train.n_cols());
        let add = |d: &Dataset| Dataset::new(d.features.with_constant_column(1.0), d.labels.clone());
        train = add(&train)?;
        test = test.as_ref().map(add).transpose()?;
        unlabeled = add(&unlabeled)?;
    }
    Ok(Problem {
        name,
        train,
        test,
        unlabeled,
        intercept,
    })
}

pub enum Penalty {
    L1(L1Penalty),
    Capped(CappedL1Penalty),
}

impl Penalty {
    pub fn new(kind: PenaltyKind, lambda: f64, theta: Option<f64>, intercept: Option<usize>) -> Result<Self, CliError> {
        Ok(match kind {
            PenaltyKind::L1 => {
                let p = L1Penalty::new(lambda)?;
                Self::L1(intercept.map_or(p, |i| p.with_unpenalized(i)))
            }
            PenaltyKind::CappedL1 => {
                let theta = theta.ok_or_else(|| CliError::Usage("--theta is required for capped_l1".into()))?;
                let p = CappedL1Penalty::new(lambda, theta)?;
                Self::Capped(intercept.map_or(p, |i| p.with_unpenalized(i)))
            }
        })
    }

    pub fn as_dyn(&self) -> &dyn DcNonsmooth {
        match self {
            Self::L1(p) => p,
            Self::Capped(p) => p,
        }
    }

    fn is_convex(&self) -> bool {
        matches!(self, Self::L1(_))
    }
}

pub enum Loss {
    Logistic(LogisticLoss),
    Transductive(TransductiveLogisticLoss),
}

impl Loss {
    pub fn new(kind: LossKind, problem: &Problem, gamma: Option<f64>, tau: Option<f64>) -> Result<Self, CliError> {
        Ok(match kind {
            LossKind::Logistic => Self::Logistic(LogisticLoss::new(problem.train.clone())?),
            LossKind::Transductive => {
                let gamma = gamma.ok_or_else(|| CliError::Usage("--gamma is required for the transductive loss".into()))?;
                let tau = tau.unwrap_or(TransductiveLogisticLoss::DEFAULT_TAU);
                Self::Transductive(TransductiveLogisticLoss::new(problem.train.clone(), problem.unlabeled.clone(), gamma, tau)?)
            }
        })
    }

    pub fn as_dyn(&self) -> &dyn DcSmooth {
        match self {
            Self::Logistic(l) => l,
            Self::Transductive(l) => l,
        }
    }

    fn is_convex(&self) -> bool {
        match self {
            Self::Logistic(_) => true,
            Self::Transductive(l) => l.gamma() == 0.0,
        }
    }
}

pub struct SolverRun {
    pub x: DenseVector,
    pub trace: SolveTrace,
    pub wall_time_s: f64,
    /// Direction norm under the identity metric (comparable across solvers).
    pub stationarity: f64,
}

pub fn run_solver(kind: SolverKind, loss: &Loss, pen: &Penalty, s: &Settings, seed: u64) -> Result<SolverRun, CliError> {
    let obj = CompositeObjective::new(loss.as_dyn(), pen.as_dyn());
    let d = obj.dim();
    let start = Instant::now();
    let (x, trace) = match kind {
        SolverKind::Dcpn => {
            let mut cfg = OuterConfig { seed, ..Default::default() };
            if let Some(m) = s.max_iters {
                cfg.max_outer_iters = m;
            }
            if let Some(t) = s.rel_tol {
                cfg.rel_obj_tol = t;
            }
            let out = prox_newton::solve(&obj, &cfg, &InnerConfig::default())?;
            (out.x, out.trace)
        }
        SolverKind::Gist => {
            let mut cfg = GistConfig::default();
            if let Some(m) = s.max_iters {
                cfg.max_iters = m;
            }
            if let Some(t) = s.rel_tol {
                cfg.rel_obj_tol = t;
            }
            let out = gist_solve(&obj, &cfg)?;
            (out.x, out.trace)
        }
        SolverKind::Dca => {
            let mut cfg = DcaConfig::default();
            if let Some(m) = s.max_iters {
                cfg.max_dc_iters = m.min(cfg.max_dc_iters);
            }
            if let Some(t) = s.rel_tol {
                cfg.rel_obj_tol = t;
            }
            let out = dca_solve(&obj, &cfg)?;
            (out.x, out.trace)
        }
        SolverKind::Proxgrad => {
            if !(loss.is_convex() && pen.is_convex()) {
                return Err(CliError::Usage("proxgrad only solves convex problems (logistic or gamma = 0, with l1)".into()));
            }
            let mut cfg = ProxGradConfig::default();
            if let Some(m) = s.max_iters {
                cfg.max_iters = m;
            }
            let zero = vec![0.0; d];
            let out = proximal_gradient_solve(loss.as_dyn(), pen.as_dyn(), &zero, &zero, &cfg)?;
            (out.x, out.trace)
        }
    };
    let wall_time_s = start.elapsed().as_secs_f64();
    let identity = ScaledIdentity { dim: d, scale: 1.0 };
    let stationarity = stationarity_check(&obj, &x, &identity, &InnerConfig::default())?;
    Ok(SolverRun {
        x,
        trace,
        wall_time_s,
        stationarity,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_settings() -> Settings {
        Settings {
            toy_d: Some(6),
            toy_t: Some(2),
            toy_train: Some(40),
            toy_test: Some(20),
            toy_unlabeled: Some(10),
            ..Default::default()
        }
    }

    #[test]
    fn toy_problem_is_standardized_and_seeded() {
        let s = toy_settings();
        let a = load_problem(&s, 1, true).unwrap();
        let b = load_problem(&s, 1, true).unwrap();
        assert_eq!(a.train, b.train);
        assert_eq!(a.train.n_cols(), 6);
        assert_eq!(a.test.as_ref().unwrap().n_rows(), 20);
        assert_eq!(a.unlabeled.n_rows(), 10);
        assert_eq!(a.name, "toy-d6-t2");
    }

    #[test]
    fn intercept_column_is_unpenalized() {
        let s = Settings { intercept: Some(true), ..toy_settings() };
        let p = load_problem(&s, 1, true).unwrap();
        assert_eq!(p.intercept, Some(6));
        assert_eq!(p.train.n_cols(), 7);
        let pen = Penalty::new(PenaltyKind::L1, 1.0, None, p.intercept).unwrap();
        let mut x = vec![0.0; 7];
        x[6] = 5.0;
        assert_eq!(pen.as_dyn().value(&x), 0.0);
    }

    #[test]
    fn proxgrad_rejects_nonconvex() {
        let p = load_problem(&toy_settings(), 1, true).unwrap();
        let loss = Loss::new(LossKind::Logistic, &p, None, None).unwrap();
        let pen = Penalty::new(PenaltyKind::CappedL1, 1.0, Some(0.5), None).unwrap();
        let r = run_solver(SolverKind::Proxgrad, &loss, &pen, &Settings::default(), 0);
        assert!(matches!(r, Err(CliError::Usage(_))));
    }

    #[test]
    fn solvers_agree_on_convex_toy() {
        let p = load_problem(&toy_settings(), 2, true).unwrap();
        let loss = Loss::new(LossKind::Logistic, &p, None, None).unwrap();
        let pen = Penalty::new(PenaltyKind::L1, 1.0, None, None).unwrap();
        let s = Settings { rel_tol: Some(1e-10), ..Default::default() };
        let objs: Vec<f64> = [SolverKind::Dcpn, SolverKind::Gist, SolverKind::Dca, SolverKind::Proxgrad]
            .into_iter()
            .map(|k| run_solver(k, &loss, &pen, &s, 0).unwrap().trace.final_objective())
            .collect();
        for o in &objs {
            assert!((o - objs[3]).abs() / objs[3] < 1e-5, "{objs:?}");
        }
    }
}
