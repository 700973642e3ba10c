//! DC proximal Newton outer loop.
//!
//! Each iteration linearizes the concave parts (`-f2`, `-h2`) at `x_k`,
//! builds `v_k = grad f1(x_k) - grad f2(x_k) - z_h2`, obtains the direction
//! from the scaled proximal subproblem under the L-BFGS metric, and
//! backtracks from `t = 1` until
//!
//! ```text
//! F(x_k + t dx) - F(x_k) <= alpha t D_k,   D_k = v_k^T dx + h1(x_k + dx) - h1(x_k).
//! ```

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::inner::{assemble_v, descent_quantity, DirectionSolver, InnerConfig, SolveOptions};
use crate::linalg::{add_scaled, dot, norm2, norm_inf, sub, DenseVector};
use crate::metric::{LbfgsMetric, Metric};
use crate::objective::CompositeObjective;
use crate::trace::{IterRecord, SolveStatus, SolveTrace};

/// Slack multiplier on the inner tolerance in `D <= -dx^T H dx + slack * tol`.
pub const DESCENT_CERTIFICATE_SLACK: f64 = 10.0;

/// Inner tolerance used by [`stationarity_check`].
pub const STATIONARITY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OuterConfig {
    pub alpha: f64,
    pub backtrack_factor: f64,
    pub max_outer_iters: usize,
    pub rel_obj_tol: f64,
    pub max_backtracks: usize,
    /// Starting point; zero vector when absent.
    pub x0: Option<DenseVector>,
    pub memory: usize,
    /// Seeds the inner solver's Lipschitz probe.
    pub seed: u64,
    /// Scale the initial metric by a finite-difference curvature probe of
    /// `f1` along the gradient instead of starting from the identity.
    pub probe_initial_curvature: bool,
}

impl Default for OuterConfig {
    fn default() -> Self {
        Self {
            alpha: 0.1,
            backtrack_factor: 0.5,
            max_outer_iters: 1000,
            rel_obj_tol: 1e-6,
            max_backtracks: 50,
            x0: None,
            memory: LbfgsMetric::DEFAULT_MEMORY,
            seed: 0,
            probe_initial_curvature: true,
        }
    }
}

impl OuterConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 0.5) {
            return Err(Error::InvalidParameter(format!(
                "alpha must lie in (0, 1/2), got {}",
                self.alpha
            )));
        }
        if !(self.backtrack_factor > 0.0 && self.backtrack_factor < 1.0) {
            return Err(Error::InvalidParameter("backtrack_factor must lie in (0, 1)".into()));
        }
        if !(self.rel_obj_tol >= 0.0) {
            return Err(Error::InvalidParameter("rel_obj_tol must be >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StationarityReport {
    /// `||dx||_inf` recomputed at the final iterate with a tight inner solve.
    pub direction_norm: f64,
    pub objective: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone)]
pub struct ProxNewtonOutput {
    pub x: DenseVector,
    pub trace: SolveTrace,
    pub report: StationarityReport,
    pub metric: LbfgsMetric,
}

/// `min(1, 2 m (1 - alpha) / L)`: steps at or below this satisfy the
/// sufficient descent test when `H >= m I` and `grad f1` is `L`-Lipschitz.
pub fn theoretical_min_step(m: f64, lipschitz: f64, alpha: f64) -> f64 {
    if !(lipschitz > 0.0) {
        return 1.0;
    }
    (2.0 * m * (1.0 - alpha) / lipschitz).min(1.0)
}

/// Recomputes the direction at `x` to a tight tolerance (cold start) and
/// returns `||dx||_inf`; zero exactly at stationary points.
pub fn stationarity_check(
    obj: &CompositeObjective<'_>,
    x: &[f64],
    metric: &dyn Metric,
    inner_cfg: &InnerConfig,
) -> Result<f64> {
    check_dim(obj.dim(), x.len())?;
    let e = obj.smooth.evaluate(x)?;
    let z_h2 = obj.nonsmooth.subgrad_h2(x);
    let v = assemble_v(&e.grad_f1, &e.grad_f2, &z_h2)?;
    let opts = SolveOptions {
        tol: inner_cfg.tol_floor.min(STATIONARITY_TOL),
        max_iters: inner_cfg.max_iters.max(200_000),
        safety: inner_cfg.lipschitz_safety,
        start: None,
        certificate_slack: None,
        seed: 0x5eed,
    };
    let r = crate::inner::solve_direction(metric, x, &v, obj.nonsmooth, &opts)?;
    Ok(norm_inf(&sub(&r.z, x)))
}

struct Direction {
    dx: DenseVector,
    descent: f64,
    quad: f64,
    inner_iters: usize,
    tol: f64,
}

enum LineSearch {
    Accepted {
        x: DenseVector,
        objective: f64,
        step: f64,
        backtracks: usize,
    },
    Failed,
}

/// Runs the DC proximal Newton method on `obj`.
pub fn solve(
    obj: &CompositeObjective<'_>,
    cfg: &OuterConfig,
    inner_cfg: &InnerConfig,
) -> Result<ProxNewtonOutput> {
    cfg.validate()?;
    let d = obj.dim();
    let start = Instant::now();
    let mut x = match &cfg.x0 {
        Some(x0) => {
            check_dim(d, x0.len())?;
            x0.clone()
        }
        None => vec![0.0; d],
    };
    let mut metric = LbfgsMetric::new(d, cfg.memory)?;
    let mut inner = DirectionSolver::new(*inner_cfg, cfg.seed)?;

    let mut eval = obj.smooth.evaluate(&x)?;
    let mut evals = 2;
    if cfg.probe_initial_curvature {
        if let Some(gamma) = probe_curvature(obj, &x, &eval.grad_f1)? {
            metric = metric.with_initial_scaling(gamma)?;
        }
        evals += 2;
    }
    let mut objective = eval.value() + obj.nonsmooth.value(&x);
    if !objective.is_finite() {
        return Err(Error::NonFinite("objective"));
    }
    let mut trace = SolveTrace::new("dcpn", objective);
    let mut last_step_norm = 0.0;
    let mut lipschitz = obj.smooth.lipschitz_bound();
    let mut observed_lipschitz: Option<f64> = None;
    trace.status = SolveStatus::MaxIters;

    for k in 0..cfg.max_outer_iters {
        let z_h2 = obj.nonsmooth.subgrad_h2(&x);
        let v = assemble_v(&eval.grad_f1, &eval.grad_f2, &z_h2)?;
        let m_bound = metric.smallest_eigen_lower_bound();
        let mut tol = crate::inner::adaptive_tolerance(k, last_step_norm, inner_cfg);

        let mut accepted = None;
        let mut attempts = 0;
        let mut stalled = false;
        while attempts < 2 {
            attempts += 1;
            let dir = compute_direction(obj, &metric, &mut inner, &x, &v, tol)?;
            if dir.dx.iter().all(|&c| c == 0.0) {
                stalled = true;
                break;
            }
            if dir.descent >= 0.0 {
                tol /= 100.0;
                stalled = true;
                continue;
            }
            stalled = false;
            match line_search(obj, cfg, &x, objective, &dir, &mut evals)? {
                LineSearch::Accepted {
                    x: x_new,
                    objective: f_new,
                    step,
                    backtracks,
                } => {
                    accepted = Some((dir, x_new, f_new, step, backtracks));
                    break;
                }
                LineSearch::Failed => {
                    tol /= 100.0;
                }
            }
        }

        let Some((dir, x_new, f_new, step, backtracks)) = accepted else {
            trace.status = if stalled {
                // no descent direction at working precision
                SolveStatus::Converged
            } else {
                SolveStatus::LineSearchFailed
            };
            break;
        };

        let new_eval = obj.smooth.evaluate(&x_new)?;
        evals += 2;
        let s = sub(&x_new, &x);
        let y = sub(&new_eval.grad_f1, &eval.grad_f1);
        let s_norm = norm2(&s);
        if s_norm > 0.0 {
            let q = norm2(&y) / s_norm;
            if q.is_finite() {
                let l = observed_lipschitz.map_or(q, |o| o.max(q));
                observed_lipschitz = Some(l);
                lipschitz = Some(l);
            }
        }
        metric.update(&s, &y)?;

        let step_norm = norm_inf(&dir.dx);
        trace.records.push(IterRecord {
            iter: k,
            objective_before: objective,
            objective: f_new,
            best_objective: f_new,
            step,
            step_norm,
            descent: Some(dir.descent),
            quad_form: Some(dir.quad),
            inner_tol: Some(dir.tol),
            inner_iters: dir.inner_iters,
            backtracks,
            min_step_bound: lipschitz.map(|l| theoretical_min_step(m_bound, l, cfg.alpha)),
            metric_lower_bound: Some(m_bound),
            lipschitz_estimate: lipschitz,
            evals,
            elapsed_s: start.elapsed().as_secs_f64(),
        });

        let rel_change = (objective - f_new).abs() / objective.abs().max(1.0);
        x = x_new;
        eval = new_eval;
        objective = f_new;
        last_step_norm = step_norm;
        if rel_change < cfg.rel_obj_tol {
            trace.status = SolveStatus::Converged;
            break;
        }
    }
    trace.evals = evals;

    let direction_norm = stationarity_check(obj, &x, &metric, inner_cfg)?;
    let report = StationarityReport {
        direction_norm,
        objective,
        iterations: trace.iterations(),
    };
    Ok(ProxNewtonOutput {
        x,
        trace,
        report,
        metric,
    })
}

/// `y^T y / s^T y` for a short step `s` against the gradient.
fn probe_curvature(obj: &CompositeObjective<'_>, x: &[f64], grad: &[f64]) -> Result<Option<f64>> {
    let g_norm = norm2(grad);
    if !(g_norm > 0.0) {
        return Ok(None);
    }
    let eps = 1e-4 * norm2(x).max(1.0);
    let s: DenseVector = grad.iter().map(|g| -eps * g / g_norm).collect();
    let probe = obj.smooth.evaluate(&add_scaled(x, 1.0, &s))?;
    let y = sub(&probe.grad_f1, grad);
    let sy = dot(&s, &y);
    let gamma = dot(&y, &y) / sy;
    Ok((sy > 0.0 && gamma.is_finite()).then_some(gamma))
}

fn compute_direction(
    obj: &CompositeObjective<'_>,
    metric: &LbfgsMetric,
    inner: &mut DirectionSolver,
    x: &[f64],
    v: &[f64],
    tol: f64,
) -> Result<Direction> {
    let r = inner.solve(metric, x, v, obj.nonsmooth, tol, Some(DESCENT_CERTIFICATE_SLACK))?;
    let dx = sub(&r.z, x);
    let descent = descent_quantity(v, &dx, obj.nonsmooth, x);
    let quad = dot(&dx, &metric.apply(&dx));
    Ok(Direction {
        dx,
        descent,
        quad,
        inner_iters: r.iterations,
        tol,
    })
}

fn line_search(
    obj: &CompositeObjective<'_>,
    cfg: &OuterConfig,
    x: &[f64],
    objective: f64,
    dir: &Direction,
    evals: &mut usize,
) -> Result<LineSearch> {
    let mut t = 1.0;
    for backtracks in 0..=cfg.max_backtracks {
        let trial = add_scaled(x, t, &dir.dx);
        let f_trial = obj.value(&trial);
        *evals += 1;
        match f_trial {
            Ok(f) if f - objective <= cfg.alpha * t * dir.descent => {
                return Ok(LineSearch::Accepted {
                    x: trial,
                    objective: f,
                    step: t,
                    backtracks,
                });
            }
            Ok(_) | Err(Error::NonFinite(_)) => {}
            Err(e) => return Err(e),
        }
        t *= cfg.backtrack_factor;
    }
    Ok(LineSearch::Failed)
}
