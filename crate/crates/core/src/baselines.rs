//! Comparison solvers: accelerated proximal gradient, GIST and DCA.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::linalg::{dot, norm_inf, sub, DenseVector};
use crate::objective::{CompositeObjective, DcNonsmooth, DcSmooth};
use crate::trace::{IterRecord, SolveStatus, SolveTrace};

fn record(iter: usize, before: f64, objective: f64, best: f64, step: f64, step_norm: f64, evals: usize, start: &Instant) -> IterRecord {
    IterRecord {
        iter,
        objective_before: before,
        objective,
        best_objective: best,
        step,
        step_norm,
        descent: None,
        quad_form: None,
        inner_tol: None,
        inner_iters: 0,
        backtracks: 0,
        min_step_bound: None,
        metric_lower_bound: None,
        lipschitz_estimate: None,
        evals,
        elapsed_s: start.elapsed().as_secs_f64(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProxGradConfig {
    /// Stop when `||x_{k+1} - y_k||_inf` (the prox-gradient residual) drops below this.
    pub tol: f64,
    pub max_iters: usize,
    pub initial_lipschitz: f64,
}

impl Default for ProxGradConfig {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iters: 5000,
            initial_lipschitz: 1.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BaselineOutput {
    pub x: DenseVector,
    pub trace: SolveTrace,
}

/// Monotone FISTA with backtracking on `f1(x) - shift^T x + h1(x)`.
///
/// Only the `f1` part of `f1_oracle` is used. Momentum restarts whenever
/// the prox step fails to decrease the objective.
pub fn proximal_gradient_solve(
    f1_oracle: &dyn DcSmooth,
    h1: &dyn DcNonsmooth,
    shift: &[f64],
    x0: &[f64],
    cfg: &ProxGradConfig,
) -> Result<BaselineOutput> {
    let d = f1_oracle.dim();
    check_dim(d, shift.len())?;
    check_dim(d, x0.len())?;
    if !(cfg.tol > 0.0) || !(cfg.initial_lipschitz > 0.0) {
        return Err(Error::InvalidParameter("tol and initial_lipschitz must be > 0".into()));
    }
    let start = Instant::now();
    let smooth_value = |x: &[f64]| -> Result<f64> { Ok(f1_oracle.value_f1(x)? - dot(shift, x)) };
    let smooth_grad = |x: &[f64]| -> Result<(f64, DenseVector)> {
        let e = f1_oracle.evaluate(x)?;
        Ok((e.f1 - dot(shift, x), sub(&e.grad_f1, shift)))
    };

    let mut x = x0.to_vec();
    let mut fx = smooth_value(&x)? + h1.value_h1(&x);
    let mut evals = 1;
    let mut trace = SolveTrace::new("proxgrad", fx);
    let mut y = x.clone();
    let mut t = 1.0_f64;
    let mut lip = cfg.initial_lipschitz;

    for k in 0..cfg.max_iters {
        let (fy, gy) = smooth_grad(&y)?;
        evals += 2;
        let (z, fz_smooth) = loop {
            let step = 1.0 / lip;
            let trial: Vec<f64> = y.iter().zip(&gy).map(|(a, g)| a - step * g).collect();
            let z = h1.prox_h1_scalar(&trial, step)?;
            let dz = sub(&z, &y);
            let fz = smooth_value(&z)?;
            evals += 1;
            if fz <= fy + dot(&gy, &dz) + 0.5 * lip * dot(&dz, &dz) || lip >= 1e300 {
                break (z, fz);
            }
            lip *= 2.0;
        };
        let residual = norm_inf(&sub(&z, &y));
        let fz = fz_smooth + h1.value_h1(&z);
        if !fz.is_finite() {
            return Err(Error::NonFinite("proximal gradient objective"));
        }
        let before = fx;
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        if fz <= fx {
            let x_prev = std::mem::replace(&mut x, z);
            fx = fz;
            let mom = (t - 1.0) / t_next;
            y = x.iter().zip(&x_prev).map(|(a, b)| a + mom * (a - b)).collect();
            t = t_next;
        } else {
            // restart from the current best point
            y = x.clone();
            t = 1.0;
        }
        trace.records.push(record(k, before, fx, fx, 1.0 / lip, residual, evals, &start));
        if residual <= cfg.tol {
            trace.status = SolveStatus::Converged;
            break;
        }
    }
    trace.evals = evals;
    Ok(BaselineOutput { x, trace })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GistConfig {
    pub monotone: bool,
    pub nonmonotone_window: usize,
    /// Bounds on the Barzilai-Borwein curvature estimate.
    pub bb_bounds: (f64, f64),
    pub sigma: f64,
    pub max_iters: usize,
    pub rel_obj_tol: f64,
    pub max_step_search: usize,
}

impl Default for GistConfig {
    fn default() -> Self {
        Self {
            monotone: false,
            nonmonotone_window: 5,
            bb_bounds: (1e-8, 1e8),
            sigma: 1e-3,
            max_iters: 5000,
            rel_obj_tol: 1e-6,
            max_step_search: 50,
        }
    }
}

/// GIST: `x+ = prox_h(x - grad f(x) / eta, 1 / eta)` with a
/// Barzilai-Borwein `eta` and a (non)monotone Armijo acceptance test.
pub fn gist_solve(obj: &CompositeObjective<'_>, cfg: &GistConfig) -> Result<BaselineOutput> {
    gist_solve_from(obj, cfg, &vec![0.0; obj.dim()])
}

pub fn gist_solve_from(obj: &CompositeObjective<'_>, cfg: &GistConfig, x0: &[f64]) -> Result<BaselineOutput> {
    check_dim(obj.dim(), x0.len())?;
    if !(cfg.sigma > 0.0 && cfg.sigma < 1.0) {
        return Err(Error::InvalidParameter("sigma must lie in (0, 1)".into()));
    }
    if obj.nonsmooth.prox_full(x0, 1.0).is_none() {
        return Err(Error::Unsupported("GIST needs a closed-form prox of h"));
    }
    let (eta_min, eta_max) = cfg.bb_bounds;
    let window = if cfg.monotone { 1 } else { cfg.nonmonotone_window.max(1) };
    let start = Instant::now();

    let mut x = x0.to_vec();
    let mut e = obj.smooth.evaluate(&x)?;
    let mut grad = e.gradient();
    let mut fx = e.value() + obj.nonsmooth.value(&x);
    let mut evals = 2;
    let mut trace = SolveTrace::new("gist", fx);
    let mut history = std::collections::VecDeque::from([fx]);
    let mut best = fx;
    let mut eta = 1.0_f64.clamp(eta_min, eta_max);

    for k in 0..cfg.max_iters {
        let reference = history.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut accepted = None;
        for attempt in 0..=cfg.max_step_search {
            let trial: Vec<f64> = x.iter().zip(&grad).map(|(a, g)| a - g / eta).collect();
            let z = obj
                .nonsmooth
                .prox_full(&trial, 1.0 / eta)
                .expect("checked above")?;
            let dz = sub(&z, &x);
            let fz = obj.value(&z);
            evals += 1;
            if let Ok(fz) = fz {
                if fz <= reference - 0.5 * cfg.sigma * eta * dot(&dz, &dz) {
                    accepted = Some((z, fz, attempt));
                    break;
                }
            }
            eta *= 2.0;
        }
        let Some((z, fz, backtracks)) = accepted else {
            trace.evals = evals;
            return Err(Error::StepSearchFailed {
                solver: "gist",
                iteration: k,
                attempts: cfg.max_step_search,
            });
        };
        let e_new = obj.smooth.evaluate(&z)?;
        evals += 2;
        let g_new = e_new.gradient();
        let s = sub(&z, &x);
        let yv = sub(&g_new, &grad);
        let ss = dot(&s, &s);
        eta = if ss > 0.0 { (dot(&s, &yv) / ss).clamp(eta_min, eta_max) } else { eta_min };

        let before = fx;
        let step_norm = norm_inf(&s);
        x = z;
        e = e_new;
        grad = g_new;
        fx = fz;
        best = best.min(fx);
        history.push_back(fx);
        while history.len() > window {
            history.pop_front();
        }
        let mut rec = record(k, before, fx, best, 1.0 / eta, step_norm, evals, &start);
        rec.backtracks = backtracks;
        trace.records.push(rec);
        if (before - fx).abs() / before.abs().max(1.0) < cfg.rel_obj_tol {
            trace.status = SolveStatus::Converged;
            break;
        }
    }
    let _ = e;
    trace.evals = evals;
    Ok(BaselineOutput { x, trace })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DcaConfig {
    pub max_dc_iters: usize,
    pub rel_obj_tol: f64,
    pub inner: ProxGradConfig,
}

impl Default for DcaConfig {
    fn default() -> Self {
        Self {
            max_dc_iters: 20,
            rel_obj_tol: 1e-6,
            inner: ProxGradConfig {
                tol: 1e-8,
                max_iters: 5000,
                initial_lipschitz: 1.0,
            },
        }
    }
}

#[derive(Debug, Clone)]
pub struct DcaOutput {
    pub x: DenseVector,
    pub trace: SolveTrace,
    /// Value of the linearized (majorizing) objective at each new iterate.
    pub majorants: Vec<f64>,
    /// Whether any convex subproblem stopped on its iteration cap.
    pub inner_capped: bool,
}

/// DCA: linearize `f2` and `h2` at `x_k` and fully solve
/// `min f1(x) + h1(x) - (grad f2(x_k) + z_h2)^T x`.
pub fn dca_solve(obj: &CompositeObjective<'_>, cfg: &DcaConfig) -> Result<DcaOutput> {
    if cfg.max_dc_iters > 20 || cfg.max_dc_iters == 0 {
        return Err(Error::InvalidParameter("max_dc_iters must lie in 1..=20".into()));
    }
    let start = Instant::now();
    let mut x = vec![0.0; obj.dim()];
    let mut fx = obj.value(&x)?;
    let mut evals = 1;
    let mut trace = SolveTrace::new("dca", fx);
    let mut majorants = Vec::new();
    let mut prev_shift: Option<DenseVector> = None;
    let mut inner_capped = false;
    let mut lip = cfg.inner.initial_lipschitz;

    for k in 0..cfg.max_dc_iters {
        let e = obj.smooth.evaluate(&x)?;
        evals += 2;
        let z_h2 = obj.nonsmooth.subgrad_h2(&x);
        let shift: Vec<f64> = e.grad_f2.iter().zip(&z_h2).map(|(a, b)| a + b).collect();
        if prev_shift.as_ref() == Some(&shift) {
            // identical convex subproblem: nothing left to do
            trace.status = SolveStatus::Converged;
            break;
        }
        let inner_cfg = ProxGradConfig {
            initial_lipschitz: lip,
            ..cfg.inner
        };
        let sub_out = proximal_gradient_solve(obj.smooth, obj.nonsmooth, &shift, &x, &inner_cfg)?;
        evals += sub_out.trace.evals;
        inner_capped |= sub_out.trace.status != SolveStatus::Converged;
        if let Some(r) = sub_out.trace.records.last() {
            lip = 1.0 / r.step;
        }
        let x_new = sub_out.x;
        let f_new = obj.value(&x_new)?;
        evals += 1;

        let dxn = sub(&x_new, &x);
        let h2_x = obj.nonsmooth.value_h2(&x);
        let majorant = obj.smooth.value_f1(&x_new)? - e.f2 - dot(&e.grad_f2, &dxn)
            + obj.nonsmooth.value_h1(&x_new)
            - h2_x
            - dot(&z_h2, &dxn);
        majorants.push(majorant);

        let before = fx;
        let mut rec = record(k, before, f_new, f_new.min(trace.best_objective()), 1.0, norm_inf(&dxn), evals, &start);
        rec.inner_iters = sub_out.trace.iterations();
        trace.records.push(rec);
        x = x_new;
        fx = f_new;
        prev_shift = Some(shift);
        if (before - fx).abs() / before.abs().max(1.0) < cfg.rel_obj_tol {
            trace.status = SolveStatus::Converged;
            break;
        }
    }
    trace.evals = evals;
    Ok(DcaOutput {
        x,
        trace,
        majorants,
        inner_capped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::losses::{LogisticLoss, Quadratic};
    use crate::regularizers::{soft_threshold, CappedL1Penalty, L1Penalty, ZeroPenalty};
    use crate::Dataset;

    #[test]
    fn quadratic_l1_matches_soft_threshold() {
        let q = Quadratic::new(vec![2.0, -0.3], vec![1.0, 4.0]).unwrap();
        let pen = L1Penalty::new(0.5).unwrap();
        let cfg = ProxGradConfig { tol: 1e-12, ..Default::default() };
        let out = proximal_gradient_solve(&q, &pen, &[0.0, 0.0], &[0.0, 0.0], &cfg).unwrap();
        assert!((out.x[0] - soft_threshold(2.0, 0.5)).abs() < 1e-10);
        assert!((out.x[1] - soft_threshold(-0.3, 0.5 / 4.0)).abs() < 1e-10);
    }

    #[test]
    fn smooth_quadratic_converges() {
        let q = Quadratic::new(vec![1.0, 2.0, -3.0], vec![1.0, 10.0, 0.1]).unwrap();
        let cfg = ProxGradConfig { tol: 1e-12, max_iters: 100_000, ..Default::default() };
        let out = proximal_gradient_solve(&q, &ZeroPenalty, &[0.0; 3], &[0.0; 3], &cfg).unwrap();
        assert_eq!(out.trace.status, SolveStatus::Converged);
        for (a, b) in out.x.iter().zip([1.0, 2.0, -3.0]) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn shift_enters_linearly() {
        // min 1/2 (x - 1)^2 - 3 x  ->  x = 4
        let q = Quadratic::isotropic(vec![1.0]);
        let cfg = ProxGradConfig { tol: 1e-12, ..Default::default() };
        let out = proximal_gradient_solve(&q, &ZeroPenalty, &[3.0], &[0.0], &cfg).unwrap();
        assert!((out.x[0] - 4.0).abs() < 1e-10);
    }

    #[test]
    fn gist_zero_data_stays_at_origin() {
        let loss = LogisticLoss::new(Dataset::empty(3)).unwrap();
        let pen = L1Penalty::new(1.0).unwrap();
        let obj = CompositeObjective::new(&loss, &pen);
        let out = gist_solve(&obj, &GistConfig::default()).unwrap();
        assert_eq!(out.x, vec![0.0; 3]);
    }

    #[test]
    fn gist_monotone_never_increases() {
        let q = Quadratic::new(vec![1.0, -2.0, 0.05], vec![1.0, 3.0, 0.5]).unwrap();
        let pen = CappedL1Penalty::new(0.4, 0.3).unwrap();
        let obj = CompositeObjective::new(&q, &pen);
        let cfg = GistConfig { monotone: true, ..Default::default() };
        let out = gist_solve(&obj, &cfg).unwrap();
        let objs = out.trace.objectives();
        assert!(objs.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn gist_rejects_penalty_without_prox() {
        struct NoProx;
        impl DcNonsmooth for NoProx {
            fn value_h1(&self, _: &[f64]) -> f64 { 0.0 }
            fn value_h2(&self, _: &[f64]) -> f64 { 0.0 }
            fn subgrad_h2(&self, x: &[f64]) -> DenseVector { vec![0.0; x.len()] }
            fn prox_h1_scalar(&self, u: &[f64], _: f64) -> Result<DenseVector> { Ok(u.to_vec()) }
        }
        let q = Quadratic::isotropic(vec![1.0]);
        let obj = CompositeObjective::new(&q, &NoProx);
        assert!(matches!(gist_solve(&obj, &GistConfig::default()), Err(Error::Unsupported(_))));
    }

    #[test]
    fn dca_convex_problem_takes_one_iteration() {
        let q = Quadratic::new(vec![2.0, -0.3], vec![1.0, 4.0]).unwrap();
        let pen = L1Penalty::new(0.5).unwrap();
        let obj = CompositeObjective::new(&q, &pen);
        let out = dca_solve(&obj, &DcaConfig::default()).unwrap();
        assert_eq!(out.trace.iterations(), 1);
        assert!((out.x[0] - 1.5).abs() < 1e-7);
    }

    #[test]
    fn dca_majorizes_and_descends() {
        let q = Quadratic::new(vec![1.0, -0.25, 0.6, 3.0], vec![1.0, 2.0, 0.5, 1.5]).unwrap();
        let pen = CappedL1Penalty::new(0.5, 0.4).unwrap();
        let obj = CompositeObjective::new(&q, &pen);
        let out = dca_solve(&obj, &DcaConfig::default()).unwrap();
        let objs = out.trace.objectives();
        for w in objs.windows(2) {
            assert!(w[1] <= w[0] + 1e-12);
        }
        for (r, m) in out.trace.records.iter().zip(&out.majorants) {
            assert!(r.objective <= m + 1e-12);
        }
        assert!(dca_solve(&obj, &DcaConfig { max_dc_iters: 21, ..Default::default() }).is_err());
    }
}
