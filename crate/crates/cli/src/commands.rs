use rayon::prelude::*;
use serde::Serialize;

use dcprox::data::{generate_toy, write_libsvm};

use crate::error::CliError;
use crate::pipeline::{load_problem, run_solver, toy_spec, Loss, Penalty, Problem, SolverRun};
use crate::report::{
    ensure_dir, summarize, write_json, write_jsonl, write_model, write_summary_csv, write_timing_csv, write_trace,
    ResultRecord,
};
use crate::settings::{LossKind, PenaltyKind, Settings, SolverKind};

/// Hyperparameters of one model, resolved from the settings.
#[derive(Debug, Clone, Copy)]
struct ModelSpec {
    loss: LossKind,
    penalty: PenaltyKind,
    lambda: f64,
    theta: Option<f64>,
    gamma: Option<f64>,
    tau: Option<f64>,
}

impl ModelSpec {
    fn from_settings(s: &Settings, loss: LossKind) -> Result<Self, CliError> {
        let penalty = s.penalty_kind()?;
        let (gamma, tau) = match loss {
            LossKind::Logistic => (None, None),
            LossKind::Transductive => {
                let g = s.gamma.ok_or_else(|| CliError::Usage("--gamma is required for the transductive loss".into()))?;
                if !(g >= 0.0 && g.is_finite()) {
                    return Err(CliError::Usage(format!("--gamma must be >= 0, got {g}")));
                }
                (Some(g), Some(s.tau.unwrap_or(dcprox::losses::TransductiveLogisticLoss::DEFAULT_TAU)))
            }
        };
        Ok(Self {
            loss,
            penalty,
            lambda: s.require_lambda()?,
            theta: s.theta_for(penalty)?,
            gamma,
            tau,
        })
    }

    fn build(&self, problem: &Problem) -> Result<(Loss, Penalty), CliError> {
        let loss = Loss::new(self.loss, problem, self.gamma, self.tau)?;
        let pen = Penalty::new(self.penalty, self.lambda, self.theta, problem.intercept)?;
        Ok((loss, pen))
    }
}

fn record(problem: &Problem, solver: SolverKind, seed: u64, m: &ModelSpec, run: &Result<SolverRun, CliError>) -> ResultRecord {
    let mut r = ResultRecord {
        dataset: problem.name.clone(),
        solver: solver.name().to_string(),
        seed,
        loss: match m.loss {
            LossKind::Logistic => "logistic",
            LossKind::Transductive => "transductive",
        }
        .to_string(),
        penalty: match m.penalty {
            PenaltyKind::L1 => "l1",
            PenaltyKind::CappedL1 => "capped_l1",
        }
        .to_string(),
        lambda: m.lambda,
        theta: m.theta,
        gamma: m.gamma,
        tau: m.tau,
        status: None,
        error: None,
        initial_objective: None,
        final_objective: None,
        accuracy: None,
        train_accuracy: None,
        iterations: 0,
        evals: 0,
        nonzeros: 0,
        stationarity: None,
        wall_time_s: 0.0,
    };
    match run {
        Ok(run) => {
            r.status = Some(run.trace.status);
            r.initial_objective = Some(run.trace.initial_objective);
            r.final_objective = Some(run.trace.final_objective());
            r.accuracy = problem.test.as_ref().and_then(|t| t.accuracy(&run.x).ok());
            r.train_accuracy = problem.train.accuracy(&run.x).ok();
            r.iterations = run.trace.iterations();
            r.evals = run.trace.evals;
            r.nonzeros = run.x.iter().filter(|v| **v != 0.0).count();
            r.stationarity = Some(run.stationarity);
            r.wall_time_s = run.wall_time_s;
        }
        Err(e) => r.error = Some(e.to_string()),
    }
    r
}

fn describe(r: &ResultRecord) -> String {
    let fmt = |v: Option<f64>, p: usize| v.map_or("-".to_string(), |v| format!("{v:.p$}"));
    format!(
        "{:<9} objective {}  accuracy {}  iterations {}  evals {}  nonzeros {}  stationarity {}  time {:.3}s",
        r.solver,
        fmt(r.final_objective, 6),
        fmt(r.accuracy, 2),
        r.iterations,
        r.evals,
        r.nonzeros,
        r.stationarity.map_or("-".to_string(), |v| format!("{v:.2e}")),
        r.wall_time_s
    )
}

pub fn toygen(s: &Settings) -> Result<(), CliError> {
    let out = s.require_out()?;
    let spec = toy_spec(s, s.seed.unwrap_or(0))?;
    let toy = generate_toy(&spec)?;
    ensure_dir(out)?;
    write_libsvm(&toy.train, out.join("train.svm"))?;
    write_libsvm(&toy.test, out.join("test.svm"))?;
    write_libsvm(&toy.unlabeled, out.join("unlabeled.svm"))?;
    #[derive(Serialize)]
    struct ToyInfo<'a> {
        spec: &'a dcprox::data::ToySpec,
        mean: &'a [f64],
        covariance: &'a [f64],
    }
    write_json(
        &out.join("toy.json"),
        &ToyInfo {
            spec: &spec,
            mean: &toy.mean,
            covariance: &toy.covariance,
        },
    )?;
    println!(
        "wrote {} train / {} test / {} unlabeled examples (d={}, t={}) to {}",
        spec.n_train,
        spec.n_test,
        spec.n_unlabeled,
        spec.d,
        spec.t,
        out.display()
    );
    Ok(())
}

pub fn train(s: &Settings) -> Result<(), CliError> {
    let out = s.require_out()?;
    let seed = s.seed.unwrap_or(0);
    let solver = s.solver.unwrap_or(SolverKind::Dcpn);
    let spec = ModelSpec::from_settings(s, s.loss.unwrap_or(LossKind::Logistic))?;
    let problem = load_problem(s, seed, false)?;
    let (loss, pen) = spec.build(&problem)?;
    let run = run_solver(solver, &loss, &pen, s, seed);
    let rec = record(&problem, solver, seed, &spec, &run);
    ensure_dir(out)?;
    write_json(&out.join("result.json"), &rec)?;
    let run = run?;
    write_model(&out.join("model.txt"), &run.x)?;
    write_trace(&out.join("trace.jsonl"), &run.trace)?;
    println!("{}", describe(&rec));
    Ok(())
}

pub fn transductive(s: &Settings) -> Result<(), CliError> {
    let out = s.require_out()?;
    if !s.uses_toy() && s.unlabeled.is_none() {
        return Err(CliError::Usage("--unlabeled (or a toy spec) is required".into()));
    }
    let seed = s.seed.unwrap_or(0);
    let solver = s.solver.unwrap_or(SolverKind::Dcpn);
    let spec = ModelSpec::from_settings(s, LossKind::Transductive)?;
    let supervised_spec = ModelSpec { gamma: Some(0.0), ..spec };
    let problem = load_problem(s, seed, false)?;
    ensure_dir(out)?;

    let mut records = Vec::new();
    let mut failure = None;
    for (tag, m) in [("transductive", spec), ("supervised", supervised_spec)] {
        let (loss, pen) = m.build(&problem)?;
        let run = run_solver(solver, &loss, &pen, s, seed);
        let rec = record(&problem, solver, seed, &m, &run);
        match run {
            Ok(run) => {
                write_model(&out.join(format!("model_{tag}.txt")), &run.x)?;
                write_trace(&out.join(format!("trace_{tag}.jsonl")), &run.trace)?;
            }
            Err(e) => failure = failure.or(Some(e)),
        }
        println!("{tag:<13} {}", describe(&rec));
        records.push(rec);
    }
    #[derive(Serialize)]
    struct Pair<'a> {
        transductive: &'a ResultRecord,
        supervised: &'a ResultRecord,
    }
    write_json(
        &out.join("result.json"),
        &Pair {
            transductive: &records[0],
            supervised: &records[1],
        },
    )?;
    failure.map_or(Ok(()), Err)
}

pub fn benchmark(s: &Settings) -> Result<(), CliError> {
    let out = s.require_out()?;
    let base = s.seed.unwrap_or(0);
    let n_seeds = s.seeds.unwrap_or(1);
    if n_seeds == 0 {
        return Err(CliError::Usage("--seeds must be >= 1".into()));
    }
    let mut solvers = match (&s.solvers, s.solver) {
        (Some(v), _) => v.clone(),
        (None, Some(k)) => vec![k],
        (None, None) => vec![SolverKind::Dcpn, SolverKind::Gist, SolverKind::Dca],
    };
    solvers.sort();
    solvers.dedup();
    let spec = ModelSpec::from_settings(s, s.loss.unwrap_or(LossKind::Logistic))?;
    let problems = (0..n_seeds as u64)
        .map(|i| load_problem(s, base + i, true))
        .collect::<Result<Vec<_>, _>>()?;

    let jobs: Vec<(usize, SolverKind)> = (0..n_seeds).flat_map(|i| solvers.iter().map(move |&k| (i, k))).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(s.jobs.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start worker threads: {e}")))?;
    let mut records: Vec<ResultRecord> = pool.install(|| {
        jobs.par_iter()
            .map(|&(i, solver)| {
                let problem = &problems[i];
                let seed = base + i as u64;
                let run = spec.build(problem).and_then(|(loss, pen)| run_solver(solver, &loss, &pen, s, seed));
                record(problem, solver, seed, &spec, &run)
            })
            .collect()
    });
    records.sort_by(|a, b| (a.solver.as_str(), a.seed).cmp(&(b.solver.as_str(), b.seed)));

    let rows = summarize(&records);
    ensure_dir(out)?;
    write_jsonl(&out.join("records.jsonl"), &records)?;
    write_summary_csv(&out.join("summary.csv"), &rows)?;
    write_json(&out.join("summary.json"), &rows)?;
    write_timing_csv(&out.join("timing.csv"), &records)?;
    for r in records.iter().filter(|r| r.error.is_some()) {
        eprintln!("{} seed {}: {}", r.solver, r.seed, r.error.as_deref().unwrap_or(""));
    }
    for row in &rows {
        let fmt = |m: Option<f64>, sd: Option<f64>| match (m, sd) {
            (Some(m), Some(sd)) => format!("{m:.4} ± {sd:.4}"),
            _ => "-".to_string(),
        };
        println!(
            "{:<9} runs {} failed {}  accuracy {}  objective {}  rel. diff vs gist {}",
            row.solver,
            row.runs,
            row.failures,
            fmt(row.accuracy_mean, row.accuracy_std),
            fmt(row.objective_mean, row.objective_std),
            row.rel_diff_vs_gist_pct.map_or("-".to_string(), |v| format!("{v:.3}%"))
        );
    }
    Ok(())
}
