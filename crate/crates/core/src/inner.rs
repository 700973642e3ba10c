//! Search-direction subproblem.
//!
//! The direction is `dx = z - x_k` where
//!
//! ```text
//! z = argmin_y  1/2 y^T H y + y^T (v - H x_k) + h1(y)
//! ```
//!
//! i.e. the scaled proximal point `prox_{h1}^H(x_k - H^{-1} v)`. It is found
//! by forward-backward splitting using only `H` products and the scalar
//! prox of `h1`. The step `1 / (safety * L)` uses a running estimate of the
//! Lipschitz constant of the quadratic's gradient taken from the quotients
//! `||grad g(y) - grad g(y')|| / ||y - y'||` of successive iterates; a step
//! whose quotient exceeds the estimate is redone with the larger estimate.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{check_dim, Error, Result};
use crate::linalg::{dot, norm2, norm_inf, sub, DenseVector};
use crate::metric::Metric;
use crate::objective::DcNonsmooth;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InnerConfig {
    pub max_iters: usize,
    pub tol_floor: f64,
    /// Inner tolerance as a fraction of the previous outer step norm.
    pub tol_scale: f64,
    pub lipschitz_safety: f64,
    pub warm_start: bool,
}

impl Default for InnerConfig {
    fn default() -> Self {
        Self {
            max_iters: 500,
            tol_floor: 1e-8,
            tol_scale: 0.1,
            lipschitz_safety: 1.1,
            warm_start: true,
        }
    }
}

impl InnerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol_floor > 0.0) {
            return Err(Error::InvalidParameter("tol_floor must be > 0".into()));
        }
        if !(self.tol_scale > 0.0 && self.tol_scale < 1.0) {
            return Err(Error::InvalidParameter("tol_scale must lie in (0, 1)".into()));
        }
        if !(self.lipschitz_safety >= 1.0) {
            return Err(Error::InvalidParameter("lipschitz_safety must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InnerResult {
    /// Subproblem minimizer; the direction is `z - x_k`.
    pub z: DenseVector,
    pub iterations: usize,
    pub final_step: f64,
    /// `||y_{t+1} - y_t||_inf` at exit.
    pub residual: f64,
    pub hit_max_iters: bool,
    /// `H (z - x_k)`, a by-product of the iteration.
    pub h_dx: DenseVector,
}

/// `v = grad f1(x) - z_f2 - z_h2`
pub fn assemble_v(grad_f1: &[f64], z_f2: &[f64], z_h2: &[f64]) -> Result<DenseVector> {
    check_dim(grad_f1.len(), z_f2.len())?;
    check_dim(grad_f1.len(), z_h2.len())?;
    Ok(grad_f1
        .iter()
        .zip(z_f2)
        .zip(z_h2)
        .map(|((g, a), b)| g - a - b)
        .collect())
}

/// Inner stopping tolerance for outer iteration `outer_iter`.
pub fn adaptive_tolerance(outer_iter: usize, last_step_norm: f64, cfg: &InnerConfig) -> f64 {
    if outer_iter == 0 {
        cfg.tol_floor.max(1e-3)
    } else {
        cfg.tol_floor.max(cfg.tol_scale * last_step_norm)
    }
}

/// `v^T dx + h1(x + dx) - h1(x)`
pub fn descent_quantity(v: &[f64], dx: &[f64], pen: &dyn DcNonsmooth, x: &[f64]) -> f64 {
    if dx.iter().all(|&d| d == 0.0) {
        return 0.0;
    }
    let z: Vec<f64> = x.iter().zip(dx).map(|(a, b)| a + b).collect();
    dot(v, dx) + pen.value_h1(&z) - pen.value_h1(x)
}

/// Options of a single subproblem solve.
#[derive(Debug, Clone, Copy)]
pub struct SolveOptions<'a> {
    pub tol: f64,
    pub max_iters: usize,
    pub safety: f64,
    /// Starting point; `x_k` when absent.
    pub start: Option<&'a [f64]>,
    /// Also require `D <= -dx^T H dx + certificate_slack * tol` before stopping.
    pub certificate_slack: Option<f64>,
    pub seed: u64,
}

/// Solves the direction subproblem from `opts.start` (or `x_k`).
pub fn solve_direction(
    metric: &dyn Metric,
    x_k: &[f64],
    v_k: &[f64],
    pen: &dyn DcNonsmooth,
    opts: &SolveOptions<'_>,
) -> Result<InnerResult> {
    let d = metric.dim();
    check_dim(d, x_k.len())?;
    check_dim(d, v_k.len())?;
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidParameter("inner tolerance must be > 0".into()));
    }
    let h1_x = pen.value_h1(x_k);

    let mut y = match opts.start {
        Some(s) => {
            check_dim(d, s.len())?;
            s.to_vec()
        }
        None => x_k.to_vec(),
    };
    // grad g(y) = H (y - x_k) + v
    let mut h_dy = metric.apply(&sub(&y, x_k));
    let mut grad: Vec<f64> = h_dy.iter().zip(v_k).map(|(a, b)| a + b).collect();

    let mut lip = initial_lipschitz(metric, opts.seed);
    let mut step = 1.0 / (opts.safety * lip);
    let mut residual = f64::INFINITY;
    let mut iterations = 0;

    while iterations < opts.max_iters {
        iterations += 1;
        let trial: Vec<f64> = y.iter().zip(&grad).map(|(a, g)| a - step * g).collect();
        let y_next = pen.prox_h1_scalar(&trial, step)?;
        let dy = sub(&y_next, &y);
        let dy_norm = norm2(&dy);
        if dy_norm == 0.0 {
            residual = 0.0;
            break;
        }
        let h_step = metric.apply(&dy);
        let q = norm2(&h_step) / dy_norm;
        if !q.is_finite() || !crate::linalg::all_finite(&y_next) {
            return Err(Error::InnerDiverged);
        }
        if q > lip {
            lip = q;
            step = 1.0 / (opts.safety * lip);
            continue;
        }
        crate::linalg::axpy(&mut grad, 1.0, &h_step);
        crate::linalg::axpy(&mut h_dy, 1.0, &h_step);
        y = y_next;
        residual = norm_inf(&dy);
        if residual <= opts.tol && certificate_holds(opts, &y, x_k, v_k, &h_dy, pen, h1_x) {
            break;
        }
    }
    let hit_max_iters = residual > opts.tol;
    Ok(InnerResult {
        z: y,
        iterations,
        final_step: step,
        residual,
        hit_max_iters,
        h_dx: h_dy,
    })
}

fn certificate_holds(
    opts: &SolveOptions<'_>,
    y: &[f64],
    x_k: &[f64],
    v_k: &[f64],
    h_dy: &[f64],
    pen: &dyn DcNonsmooth,
    h1_x: f64,
) -> bool {
    let Some(slack) = opts.certificate_slack else {
        return true;
    };
    let dx = sub(y, x_k);
    let descent = dot(v_k, &dx) + pen.value_h1(y) - h1_x;
    descent <= -dot(&dx, h_dy) + slack * opts.tol
}

/// Quotient `||H u|| / ||u||` along one random direction.
fn initial_lipschitz(metric: &dyn Metric, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = metric.dim();
    let mut u: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
    let n = norm2(&u);
    if n == 0.0 || d == 0 {
        return metric.eigen_lower_bound().max(f64::MIN_POSITIVE);
    }
    // probe pair (y0, y0 + 1e-2 u) with unit u
    for ui in &mut u {
        *ui *= 1e-2 / n;
    }
    let q = norm2(&metric.apply(&u)) / 1e-2;
    q.max(metric.eigen_lower_bound()).max(f64::MIN_POSITIVE)
}

/// Stateful wrapper carrying the warm start across outer iterations.
#[derive(Debug, Clone)]
pub struct DirectionSolver {
    cfg: InnerConfig,
    warm: Option<DenseVector>,
    seed: u64,
}

impl DirectionSolver {
    pub fn new(cfg: InnerConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            cfg,
            warm: None,
            seed,
        })
    }

    pub fn config(&self) -> &InnerConfig {
        &self.cfg
    }

    /// Solves to `tol`, also enforcing the descent certificate with the given slack.
    pub fn solve(
        &mut self,
        metric: &dyn Metric,
        x_k: &[f64],
        v_k: &[f64],
        pen: &dyn DcNonsmooth,
        tol: f64,
        certificate_slack: Option<f64>,
    ) -> Result<InnerResult> {
        let start = if self.cfg.warm_start {
            self.warm.as_deref().filter(|w| w.len() == x_k.len())
        } else {
            None
        };
        let opts = SolveOptions {
            tol,
            max_iters: self.cfg.max_iters,
            safety: self.cfg.lipschitz_safety,
            start,
            certificate_slack,
            seed: self.seed,
        };
        self.seed = self.seed.wrapping_add(1);
        let res = solve_direction(metric, x_k, v_k, pen, &opts)?;
        self.warm = Some(res.z.clone());
        Ok(res)
    }

    pub fn reset_warm_start(&mut self) {
        self.warm = None;
    }
}
