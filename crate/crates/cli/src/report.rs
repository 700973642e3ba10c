//! Result records, aggregation and the files written to the output directory.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use dcprox::{SolveStatus, SolveTrace};

use crate::error::CliError;

/// One solver run. `accuracy` is on the test set when there is one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub dataset: String,
    pub solver: String,
    pub seed: u64,
    pub loss: String,
    pub penalty: String,
    pub lambda: f64,
    pub theta: Option<f64>,
    pub gamma: Option<f64>,
    pub tau: Option<f64>,
    pub status: Option<SolveStatus>,
    pub error: Option<String>,
    pub initial_objective: Option<f64>,
    pub final_objective: Option<f64>,
    pub accuracy: Option<f64>,
    pub train_accuracy: Option<f64>,
    pub iterations: usize,
    pub evals: usize,
    pub nonzeros: usize,
    pub stationarity: Option<f64>,
    pub wall_time_s: f64,
}

pub fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn write_file(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

/// Nonzero weights as `idx:value` lines with 1-based indices.
pub fn write_model(path: &Path, x: &[f64]) -> Result<(), CliError> {
    let mut out = String::new();
    for (i, v) in x.iter().enumerate().filter(|(_, v)| **v != 0.0) {
        out.push_str(&format!("{}:{:?}\n", i + 1, v));
    }
    write_file(path, out.as_bytes())
}

/// One JSON object per iteration.
pub fn write_trace(path: &Path, trace: &SolveTrace) -> Result<(), CliError> {
    let mut out = Vec::new();
    for r in &trace.records {
        serde_json::to_writer(&mut out, r).expect("record serializes");
        out.push(b'\n');
    }
    write_file(path, &out)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut out = serde_json::to_vec_pretty(value).expect("value serializes");
    out.push(b'\n');
    write_file(path, &out)
}

pub fn write_jsonl(path: &Path, records: &[ResultRecord]) -> Result<(), CliError> {
    let mut out = Vec::new();
    for r in records {
        serde_json::to_writer(&mut out, r).expect("record serializes");
        out.push(b'\n');
    }
    write_file(path, &out)
}

/// Per-solver aggregate over seeds. Standard deviations use the n-1 divisor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub dataset: String,
    pub solver: String,
    pub runs: usize,
    pub failures: usize,
    pub accuracy_mean: Option<f64>,
    pub accuracy_std: Option<f64>,
    pub objective_mean: Option<f64>,
    pub objective_std: Option<f64>,
    pub iterations_mean: Option<f64>,
    pub evals_mean: Option<f64>,
    pub stationarity_mean: Option<f64>,
    /// Mean over seeds of `100 (F_gist - F_solver) / |F_gist|`; negative when
    /// this solver ends above GIST.
    pub rel_diff_vs_gist_pct: Option<f64>,
}

fn mean_std(v: &[f64]) -> (Option<f64>, Option<f64>) {
    if v.is_empty() {
        return (None, None);
    }
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let s = if v.len() > 1 {
        (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    (Some(m), Some(s))
}

/// Records must already be sorted by (solver, seed).
pub fn summarize(records: &[ResultRecord]) -> Vec<SummaryRow> {
    let mut solvers: Vec<&str> = records.iter().map(|r| r.solver.as_str()).collect();
    solvers.dedup();
    let gist_obj = |dataset: &str, seed: u64| {
        records
            .iter()
            .find(|r| r.solver == "gist" && r.seed == seed && r.dataset == dataset)
            .and_then(|r| r.final_objective)
    };
    solvers
        .into_iter()
        .map(|solver| {
            let rows: Vec<&ResultRecord> = records.iter().filter(|r| r.solver == solver).collect();
            let ok: Vec<&&ResultRecord> = rows.iter().filter(|r| r.error.is_none()).collect();
            let col = |f: &dyn Fn(&ResultRecord) -> Option<f64>| -> Vec<f64> { ok.iter().filter_map(|r| f(r)).collect() };
            let (accuracy_mean, accuracy_std) = mean_std(&col(&|r| r.accuracy));
            let (objective_mean, objective_std) = mean_std(&col(&|r| r.final_objective));
            let rel: Vec<f64> = ok
                .iter()
                .filter_map(|r| {
                    let g = gist_obj(&r.dataset, r.seed)?;
                    let f = r.final_objective?;
                    Some(100.0 * (g - f) / g.abs().max(f64::MIN_POSITIVE))
                })
                .collect();
            SummaryRow {
                dataset: rows[0].dataset.clone(),
                solver: solver.to_string(),
                runs: rows.len(),
                failures: rows.len() - ok.len(),
                accuracy_mean,
                accuracy_std,
                objective_mean,
                objective_std,
                iterations_mean: mean_std(&col(&|r| Some(r.iterations as f64))).0,
                evals_mean: mean_std(&col(&|r| Some(r.evals as f64))).0,
                stationarity_mean: mean_std(&col(&|r| r.stationarity)).0,
                rel_diff_vs_gist_pct: mean_std(&rel).0,
            }
        })
        .collect()
}

pub fn write_summary_csv(path: &Path, rows: &[SummaryRow]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| CliError::io(path, e))?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::io(path, e))?;
    write_file(path, &bytes)
}

/// Wall-clock times live in their own file so the summary stays byte-reproducible.
pub fn write_timing_csv(path: &Path, records: &[ResultRecord]) -> Result<(), CliError> {
    let mut out = Vec::new();
    writeln!(out, "dataset,solver,seed,wall_time_s").expect("in-memory write");
    for r in records {
        writeln!(out, "{},{},{},{}", r.dataset, r.solver, r.seed, r.wall_time_s).expect("in-memory write");
    }
    write_file(path, &out)
}
