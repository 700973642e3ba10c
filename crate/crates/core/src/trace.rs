//! Per-iteration solver records.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Converged,
    MaxIters,
    LineSearchFailed,
}

/// One accepted outer iteration.
///
/// Fields that only make sense for the proximal Newton solver (`descent`,
/// `quad_form`, `inner_tol`, ...) are `None` for the baselines.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterRecord {
    pub iter: usize,
    /// Objective at the start of the iteration.
    pub objective_before: f64,
    /// Objective at the accepted iterate.
    pub objective: f64,
    /// Lowest objective seen so far (differs from `objective` only for
    /// nonmonotone methods).
    pub best_objective: f64,
    pub step: f64,
    /// `||x_{k+1} - x_k||_inf` for baselines, `||dx_k||_inf` for proximal Newton.
    pub step_norm: f64,
    pub descent: Option<f64>,
    pub quad_form: Option<f64>,
    pub inner_tol: Option<f64>,
    pub inner_iters: usize,
    pub backtracks: usize,
    /// Lower bound on the accepted step predicted from curvature estimates.
    pub min_step_bound: Option<f64>,
    /// Smallest-eigenvalue bound of the metric used for this direction.
    pub metric_lower_bound: Option<f64>,
    /// Running estimate of the Lipschitz constant of grad f1.
    pub lipschitz_estimate: Option<f64>,
    /// Cumulative objective/gradient evaluation equivalents.
    pub evals: usize,
    pub elapsed_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveTrace {
    pub solver: String,
    pub initial_objective: f64,
    pub records: Vec<IterRecord>,
    pub status: SolveStatus,
    /// Total evaluation equivalents, including any work after the last record.
    pub evals: usize,
}

impl SolveTrace {
    pub fn new(solver: &str, initial_objective: f64) -> Self {
        Self {
            solver: solver.to_string(),
            initial_objective,
            records: Vec::new(),
            status: SolveStatus::MaxIters,
            evals: 0,
        }
    }

    pub fn iterations(&self) -> usize {
        self.records.len()
    }

    pub fn final_objective(&self) -> f64 {
        self.records
            .last()
            .map_or(self.initial_objective, |r| r.objective)
    }

    pub fn best_objective(&self) -> f64 {
        self.records
            .iter()
            .map(|r| r.objective)
            .fold(self.initial_objective, f64::min)
    }

    /// Objective values starting with the initial point.
    pub fn objectives(&self) -> Vec<f64> {
        std::iter::once(self.initial_objective)
            .chain(self.records.iter().map(|r| r.objective))
            .collect()
    }

    pub fn is_strictly_decreasing(&self) -> bool {
        self.objectives().windows(2).all(|w| w[1] < w[0])
    }

    /// Evaluations spent until the objective first came within `rel_tol`
    /// (relative) of `target`.
    pub fn evals_to_reach(&self, target: f64, rel_tol: f64) -> Option<usize> {
        let thresh = target + rel_tol * target.abs().max(1e-300);
        if self.initial_objective <= thresh {
            return Some(0);
        }
        self.records
            .iter()
            .find(|r| r.objective <= thresh)
            .map(|r| r.evals)
    }
}
