use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn dcprox(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dcprox")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = dcprox(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn trace(path: &Path) -> Vec<Value> {
    fs::read_to_string(path).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const TOY: [&str; 8] = ["--toy-d", "50", "--toy-t", "5", "--toy-train", "100", "--toy-test", "200"];

#[test]
fn train_capped_l1_decreases_objective() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["train", "--out", s(dir.path()), "--seed", "7", "--solver", "dcpn"];
    args.extend(["--penalty", "capped_l1", "--lambda", "2", "--theta", "0.2"]);
    args.extend(TOY);
    ok(&args);

    let recs = trace(&dir.path().join("trace.jsonl"));
    assert!(!recs.is_empty());
    for r in &recs {
        assert!(r["objective"].as_f64().unwrap() < r["objective_before"].as_f64().unwrap(), "{r}");
    }
    let res = json(&dir.path().join("result.json"));
    assert_eq!(res["solver"], "dcpn");
    assert!(res["final_objective"].as_f64().unwrap() < res["initial_objective"].as_f64().unwrap());
    assert!(res["accuracy"].as_f64().unwrap() > 50.0);
    let model = fs::read_to_string(dir.path().join("model.txt")).unwrap();
    assert_eq!(model.lines().count(), res["nonzeros"].as_u64().unwrap() as usize);
}

#[test]
fn missing_training_file_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.svm");
    let out = dcprox(&["train", "--train", s(&missing), "--out", s(dir.path()), "--penalty", "l1", "--lambda", "1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope.svm"));
}

#[test]
fn huge_lambda_gives_zero_model_and_majority_accuracy() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    ok(&["toygen", "--out", s(&data), "--seed", "3", "--toy-d", "10", "--toy-t", "3", "--toy-train", "40", "--toy-test", "31"]);

    let out = dir.path().join("run");
    let (train, test) = (data.join("train.svm"), data.join("test.svm"));
    ok(&["train", "--train", s(&train), "--test", s(&test), "--out", s(&out), "--penalty", "l1", "--lambda", "1e6"]);
    assert_eq!(fs::read_to_string(out.join("model.txt")).unwrap(), "");
    // A zero score predicts +1 for every example.
    let text = fs::read_to_string(&test).unwrap();
    let pos = text.lines().filter(|l| l.starts_with("+1")).count();
    let acc = json(&out.join("result.json"))["accuracy"].as_f64().unwrap();
    assert!((acc - 100.0 * pos as f64 / 31.0).abs() < 1e-9, "{acc}");
}

fn benchmark(out: &Path, extra: &[&str]) {
    let mut args = vec!["benchmark", "--out", s(out), "--seeds", "3", "--seed", "11"];
    args.extend(["--penalty", "capped_l1", "--lambda", "2", "--theta", "0.2"]);
    args.extend(["--toy-d", "200", "--toy-t", "10", "--toy-train", "500", "--toy-test", "200"]);
    args.extend(extra);
    ok(&args);
}

#[test]
fn benchmark_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    benchmark(&a, &["--solvers", "gist,dcpn,dca"]);
    benchmark(&b, &["--solvers", "dca,dcpn,gist", "--jobs", "2"]);

    let summary = fs::read_to_string(a.join("summary.csv")).unwrap();
    assert_eq!(summary, fs::read_to_string(b.join("summary.csv")).unwrap());
    let lines: Vec<&str> = summary.lines().collect();
    assert_eq!(lines.len(), 4);
    assert!(lines[0].starts_with("dataset,solver,runs,failures,"));
    for (line, solver) in lines[1..].iter().zip(["dca", "dcpn", "gist"]) {
        assert!(line.contains(&format!(",{solver},3,0,")), "{line}");
    }
    assert_eq!(fs::read_to_string(a.join("records.jsonl")).unwrap().lines().count(), 9);
    assert_eq!(fs::read_to_string(a.join("timing.csv")).unwrap().lines().count(), 10);
    let rows = json(&a.join("summary.json"));
    let gist = rows.as_array().unwrap().iter().find(|r| r["solver"] == "gist").unwrap();
    assert_eq!(gist["rel_diff_vs_gist_pct"].as_f64(), Some(0.0));
}

#[test]
fn benchmark_single_solver() {
    let dir = tempfile::tempdir().unwrap();
    benchmark(dir.path(), &["--solver", "gist"]);
    assert_eq!(fs::read_to_string(dir.path().join("summary.csv")).unwrap().lines().count(), 2);
}

fn transductive(out: &Path, gamma: &str, n_unlabeled: &str) -> Value {
    let mut args = vec!["transductive", "--out", s(out), "--seed", "5", "--gamma", gamma];
    args.extend(["--penalty", "l1", "--lambda", "1", "--toy-unlabeled", n_unlabeled]);
    args.extend(TOY);
    ok(&args);
    assert!(out.join("model_transductive.txt").exists());
    assert!(out.join("model_supervised.txt").exists());
    json(&out.join("result.json"))
}

#[test]
fn transductive_reduces_to_supervised() {
    let dir = tempfile::tempdir().unwrap();
    for (name, gamma, n_unl) in [("g0", "0", "100"), ("n0", "0.01", "0")] {
        let out = dir.path().join(name);
        let r = transductive(&out, gamma, n_unl);
        assert_eq!(r["transductive"]["accuracy"], r["supervised"]["accuracy"], "{name}");
        assert_eq!(
            fs::read_to_string(out.join("model_transductive.txt")).unwrap(),
            fs::read_to_string(out.join("model_supervised.txt")).unwrap()
        );
    }
}

#[test]
fn config_file_overrides_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "solver = \"gist\"\npenalty = \"l1\"\nlambda = 0.5\n").unwrap();
    let mut args = vec!["train", "--config", s(&cfg), "--out", s(dir.path()), "--solver", "dca", "--lambda", "9"];
    args.extend(TOY);
    ok(&args);
    let res = json(&dir.path().join("result.json"));
    assert_eq!(res["solver"], "gist");
    assert_eq!(res["lambda"].as_f64(), Some(0.5));

    fs::write(&cfg, "lamda = 1\n").unwrap();
    let out = dcprox(&["train", "--config", s(&cfg), "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn proxgrad_rejects_nonconvex_problem() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["train", "--out", s(dir.path()), "--solver", "proxgrad"];
    args.extend(["--penalty", "capped_l1", "--lambda", "2", "--theta", "0.2"]);
    args.extend(TOY);
    let out = dcprox(&args);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("convex"));
}
