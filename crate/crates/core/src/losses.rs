//! Smooth DC losses: logistic regression and the symmetric transductive
//! loss on unlabeled margins.

use crate::error::{check_dim, Error, Result};
use crate::linalg::{spmv, spmv_transpose, DenseVector};
use crate::objective::{DcSmooth, SmoothEval};
use crate::Dataset;

/// `log(1 + exp(-u))`, finite for any finite `u`.
pub fn log1p_exp_neg(u: f64) -> f64 {
    if u >= 0.0 {
        (-u).exp().ln_1p()
    } else {
        -u + u.exp().ln_1p()
    }
}

/// `1 / (1 + exp(-u))` without overflow.
pub fn sigmoid(u: f64) -> f64 {
    if u >= 0.0 {
        1.0 / (1.0 + (-u).exp())
    } else {
        let e = u.exp();
        e / (1.0 + e)
    }
}

/// Derivative of `log1p_exp_neg`: `-sigmoid(-u)`.
fn log1p_exp_neg_deriv(u: f64) -> f64 {
    -sigmoid(-u)
}

/// Scalar pieces of the transductive loss at one margin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransductiveScalar {
    /// `T(u) = 1 - g1(u) - g1(-u)`
    pub t: f64,
    pub t1: f64,
    pub t2: f64,
    pub dt1: f64,
    pub dt2: f64,
}

/// Evaluates `T(u)` and its convex pieces `T1`, `T2` with `T = T1 - T2`.
///
/// With `g(u) = log(1 + exp(-u))` and `g1(u) = (g(u) - g(u + tau)) / tau`:
/// `T1(u) = 1 + (g(u + tau) + g(tau - u)) / tau`, `T2(u) = (g(u) + g(-u)) / tau`.
pub fn transductive_scalar(u: f64, tau: f64) -> Result<TransductiveScalar> {
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(Error::InvalidParameter(format!("tau must be > 0, got {tau}")));
    }
    Ok(transductive_scalar_unchecked(u, tau))
}

#[inline]
fn transductive_scalar_unchecked(u: f64, tau: f64) -> TransductiveScalar {
    let g = log1p_exp_neg;
    let dg = log1p_exp_neg_deriv;
    let (g_u, g_mu) = (g(u), g(-u));
    let (g_up, g_mup) = (g(u + tau), g(tau - u));
    let g1 = (g_u - g_up) / tau;
    let g2 = (g_mu - g_mup) / tau;
    TransductiveScalar {
        t: 1.0 - g1 - g2,
        t1: 1.0 + (g_up + g_mup) / tau,
        t2: (g_u + g_mu) / tau,
        dt1: (dg(u + tau) - dg(tau - u)) / tau,
        dt2: (dg(u) - dg(-u)) / tau,
    }
}

/// `sum_i log(1 + exp(-y_i a_i^T x))`; purely convex, so `f2 = 0`.
#[derive(Debug, Clone)]
pub struct LogisticLoss {
    data: Dataset,
}

impl LogisticLoss {
    pub fn new(data: Dataset) -> Result<Self> {
        if !data.is_labeled() {
            return Err(Error::InvalidParameter("logistic loss needs labels".into()));
        }
        Ok(Self { data })
    }

    pub fn data(&self) -> &Dataset {
        &self.data
    }

    /// Value and gradient of the loss.
    pub fn value_grad(&self, x: &[f64]) -> Result<(f64, DenseVector)> {
        check_dim(self.dim(), x.len())?;
        let margins = spmv(&self.data.features, x)?;
        let (value, weights) = logistic_terms(&margins, &self.data.labels);
        Ok((value, spmv_transpose(&self.data.features, &weights)?))
    }

    pub fn value_only(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim(), x.len())?;
        let margins = spmv(&self.data.features, x)?;
        Ok(margins
            .iter()
            .zip(&self.data.labels)
            .map(|(m, &y)| log1p_exp_neg(f64::from(y) * m))
            .sum())
    }
}

/// Returns the summed loss and the per-row gradient weights
/// `-sigmoid(-y_i m_i) * y_i`.
fn logistic_terms(margins: &[f64], labels: &[i8]) -> (f64, Vec<f64>) {
    let mut value = 0.0;
    let weights = margins
        .iter()
        .zip(labels)
        .map(|(m, &y)| {
            let y = f64::from(y);
            let ym = y * m;
            value += log1p_exp_neg(ym);
            -sigmoid(-ym) * y
        })
        .collect();
    (value, weights)
}

impl DcSmooth for LogisticLoss {
    fn dim(&self) -> usize {
        self.data.n_cols()
    }

    fn values(&self, x: &[f64]) -> Result<(f64, f64)> {
        Ok((self.value_only(x)?, 0.0))
    }

    fn evaluate(&self, x: &[f64]) -> Result<SmoothEval> {
        let (f1, grad_f1) = self.value_grad(x)?;
        Ok(SmoothEval {
            f1,
            f2: 0.0,
            grad_f1,
            grad_f2: vec![0.0; x.len()],
        })
    }

    fn lipschitz_bound(&self) -> Option<f64> {
        Some(0.25 * self.data.features.row_sq_norms().iter().sum::<f64>())
    }
}

/// Logistic loss on labeled rows plus `gamma * sum_j T(b_j^T x)` on
/// unlabeled rows.
#[derive(Debug, Clone)]
pub struct TransductiveLogisticLoss {
    labeled: Dataset,
    unlabeled: Dataset,
    gamma: f64,
    tau: f64,
}

impl TransductiveLogisticLoss {
    pub const DEFAULT_TAU: f64 = 1.0;

    pub fn new(labeled: Dataset, unlabeled: Dataset, gamma: f64, tau: f64) -> Result<Self> {
        if !labeled.is_labeled() {
            return Err(Error::InvalidParameter("labeled set has no labels".into()));
        }
        check_dim(labeled.n_cols(), unlabeled.n_cols())?;
        if !(gamma >= 0.0) || !gamma.is_finite() {
            return Err(Error::InvalidParameter(format!("gamma must be >= 0, got {gamma}")));
        }
        if !(tau > 0.0) || !tau.is_finite() {
            return Err(Error::InvalidParameter(format!("tau must be > 0, got {tau}")));
        }
        Ok(Self {
            labeled,
            unlabeled,
            gamma,
            tau,
        })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// `f(x)` computed from `T` directly rather than through `T1 - T2`.
    pub fn direct_value(&self, x: &[f64]) -> Result<f64> {
        let logistic = LogisticLoss {
            data: self.labeled.clone(),
        }
        .value_only(x)?;
        let um = spmv(&self.unlabeled.features, x)?;
        let t: f64 = um
            .iter()
            .map(|&u| transductive_scalar_unchecked(u, self.tau).t)
            .sum();
        Ok(logistic + self.gamma * t)
    }

    fn unlabeled_active(&self) -> bool {
        self.gamma > 0.0 && self.unlabeled.n_rows() > 0
    }
}

/// `(f1, grad f1, f2, grad f2)` of the transductive loss.
pub fn transductive_value_grads(
    loss: &TransductiveLogisticLoss,
    x: &[f64],
) -> Result<(f64, DenseVector, f64, DenseVector)> {
    let e = loss.evaluate(x)?;
    Ok((e.f1, e.grad_f1, e.f2, e.grad_f2))
}

impl DcSmooth for TransductiveLogisticLoss {
    fn dim(&self) -> usize {
        self.labeled.n_cols()
    }

    fn values(&self, x: &[f64]) -> Result<(f64, f64)> {
        check_dim(self.dim(), x.len())?;
        let lm = spmv(&self.labeled.features, x)?;
        let mut f1: f64 = lm
            .iter()
            .zip(&self.labeled.labels)
            .map(|(m, &y)| log1p_exp_neg(f64::from(y) * m))
            .sum();
        let mut f2 = 0.0;
        if self.unlabeled_active() {
            let um = spmv(&self.unlabeled.features, x)?;
            let (mut s1, mut s2) = (0.0, 0.0);
            for &u in &um {
                let t = transductive_scalar_unchecked(u, self.tau);
                s1 += t.t1;
                s2 += t.t2;
            }
            f1 += self.gamma * s1;
            f2 = self.gamma * s2;
        }
        Ok((f1, f2))
    }

    fn evaluate(&self, x: &[f64]) -> Result<SmoothEval> {
        check_dim(self.dim(), x.len())?;
        let lm = spmv(&self.labeled.features, x)?;
        let (mut f1, lw) = logistic_terms(&lm, &self.labeled.labels);
        let mut grad_f1 = spmv_transpose(&self.labeled.features, &lw)?;
        let mut f2 = 0.0;
        let mut grad_f2 = vec![0.0; x.len()];
        if self.unlabeled_active() {
            let um = spmv(&self.unlabeled.features, x)?;
            let n = um.len();
            let (mut s1, mut s2) = (0.0, 0.0);
            let mut w1 = Vec::with_capacity(n);
            let mut w2 = Vec::with_capacity(n);
            for &u in &um {
                let t = transductive_scalar_unchecked(u, self.tau);
                s1 += t.t1;
                s2 += t.t2;
                w1.push(self.gamma * t.dt1);
                w2.push(self.gamma * t.dt2);
            }
            f1 += self.gamma * s1;
            f2 = self.gamma * s2;
            let g1u = spmv_transpose(&self.unlabeled.features, &w1)?;
            crate::linalg::axpy(&mut grad_f1, 1.0, &g1u);
            grad_f2 = spmv_transpose(&self.unlabeled.features, &w2)?;
        }
        Ok(SmoothEval {
            f1,
            f2,
            grad_f1,
            grad_f2,
        })
    }

    fn lipschitz_bound(&self) -> Option<f64> {
        let lab: f64 = self.labeled.features.row_sq_norms().iter().sum();
        let unl: f64 = self.unlabeled.features.row_sq_norms().iter().sum();
        // T1'' <= 1 / (2 tau)
        Some(0.25 * lab + self.gamma * unl / (2.0 * self.tau))
    }
}

/// Separable quadratic `f1(x) = 1/2 sum_i d_i (x_i - c_i)^2`, `f2 = 0`.
#[derive(Debug, Clone)]
pub struct Quadratic {
    center: Vec<f64>,
    diag: Vec<f64>,
}

impl Quadratic {
    pub fn new(center: Vec<f64>, diag: Vec<f64>) -> Result<Self> {
        check_dim(center.len(), diag.len())?;
        if diag.iter().any(|&d| !(d > 0.0)) {
            return Err(Error::InvalidParameter("diagonal must be positive".into()));
        }
        Ok(Self { center, diag })
    }

    /// `1/2 ||x - c||^2`
    pub fn isotropic(center: Vec<f64>) -> Self {
        let diag = vec![1.0; center.len()];
        Self { center, diag }
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }
}

impl DcSmooth for Quadratic {
    fn dim(&self) -> usize {
        self.center.len()
    }

    fn values(&self, x: &[f64]) -> Result<(f64, f64)> {
        check_dim(self.dim(), x.len())?;
        let v = x
            .iter()
            .zip(&self.center)
            .zip(&self.diag)
            .map(|((x, c), d)| 0.5 * d * (x - c) * (x - c))
            .sum();
        Ok((v, 0.0))
    }

    fn evaluate(&self, x: &[f64]) -> Result<SmoothEval> {
        let (f1, _) = self.values(x)?;
        Ok(SmoothEval {
            f1,
            f2: 0.0,
            grad_f1: x
                .iter()
                .zip(&self.center)
                .zip(&self.diag)
                .map(|((x, c), d)| d * (x - c))
                .collect(),
            grad_f2: vec![0.0; x.len()],
        })
    }

    fn lipschitz_bound(&self) -> Option<f64> {
        Some(self.diag.iter().fold(0.0, |m: f64, &d| m.max(d)))
    }
}
