use std::path::Path;
use std::process::{Command, Output};

use causal_pareto::experiment::{aggregate, aggregate_from_csv};
use causal_pareto::pareto::front_from_csv;
use causal_pareto::solver::RunReport;
use serde_json::Value;

fn cli(root: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_causal-pareto"))
        .args(args)
        .env("CAUSAL_PARETO_OUT", root)
        .output()
        .expect("binary runs")
}

fn ok(root: &Path, args: &[&str]) -> String {
    let out = cli(root, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn sets(v: &Value) -> Vec<Vec<String>> {
    serde_json::from_value(v.clone()).unwrap()
}

#[test]
fn graph_analyze_reports_pomis_families() {
    let dir = tempfile::tempdir().unwrap();
    let json: Value = serde_json::from_str(&ok(
        dir.path(),
        &["graph", "analyze", "--problem", "synthetic2"],
    ))
    .unwrap();
    assert_eq!(
        sets(&json["pomis"]),
        vec![vec!["X1", "X2", "X3"], vec!["X2", "X3"]]
    );
    let json: Value = serde_json::from_str(&ok(
        dir.path(),
        &["run", "--mode", "graph-analyze", "--problem", "health"],
    ))
    .unwrap();
    assert_eq!(sets(&json["pomis"]), vec![vec!["Aspirin", "BMI"]]);
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = cli(dir.path(), &["run", "--problem", "nope"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("synthetic1") && err.contains("synthetic2") && err.contains("health"));
    assert_eq!(
        cli(dir.path(), &["run", "--iters", "x"]).status.code(),
        Some(2)
    );
    assert_eq!(cli(dir.path(), &["frobnicate"]).status.code(), Some(2));
}

#[test]
fn runtime_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.scm");
    let out = cli(
        dir.path(),
        &["scm", "eval", "--spec", missing.to_str().unwrap()],
    );
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn scm_eval_prints_means() {
    let dir = tempfile::tempdir().unwrap();
    let json: Value = serde_json::from_str(&ok(
        dir.path(),
        &[
            "scm",
            "eval",
            "--problem",
            "synthetic1",
            "--do",
            "X1=0,X2=1.5",
            "--mc-samples",
            "20000",
        ],
    ))
    .unwrap();
    let means: Vec<f64> = serde_json::from_value(json["means"].clone()).unwrap();
    // Y1 = X1^2 + X2^2/2 + noise, Y2 = (X1-1.5)^2 + (X2-1.5)^2 + noise.
    assert!((means[0] - 1.125).abs() < 0.05, "{means:?}");
    assert!((means[1] - 2.25).abs() < 0.05, "{means:?}");
}

#[test]
fn ground_truth_rerun_hits_the_cache() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "ground-truth",
        "--problem",
        "synthetic1",
        "--grid",
        "21",
        "--mc-samples",
        "2000",
    ];
    let first = cli(dir.path(), &args);
    assert!(String::from_utf8_lossy(&first.stderr).contains("computed"));
    let file = dir.path().join("ground-truth-synthetic1-grid21/front.csv");
    let a = std::fs::read(&file).unwrap();
    let second = cli(dir.path(), &args);
    assert!(String::from_utf8_lossy(&second.stderr).contains("cached"));
    assert_eq!(a, std::fs::read(&file).unwrap());
    assert!(!front_from_csv(std::str::from_utf8(&a).unwrap())
        .unwrap()
        .is_empty());
}

#[test]
fn health_ground_truth_is_non_empty() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("gt");
    ok(
        dir.path(),
        &[
            "ground-truth",
            "--problem",
            "health",
            "--grid",
            "11",
            "--mc-samples",
            "2000",
            "--out",
            out.to_str().unwrap(),
        ],
    );
    let front = front_from_csv(&std::fs::read_to_string(out.join("front.csv")).unwrap()).unwrap();
    assert!(!front.is_empty());
    assert!(front.iter().all(|p| p.set.to_string() == "{Aspirin,BMI}"));
}

fn small_run(root: &Path, out: &Path, problem: &str, mode: &str, extra: &[&str]) -> String {
    let mut args = vec![
        "run",
        "--problem",
        problem,
        "--mode",
        mode,
        "--iters",
        "2",
        "--seeds",
        "2",
        "--mc-samples",
        "500",
        "--grid",
        "11",
        "--out",
        out.to_str().unwrap(),
    ];
    args.extend_from_slice(extra);
    ok(root, &args)
}

fn reports(dir: &Path, n: usize) -> Vec<RunReport> {
    (0..n)
        .map(|k| {
            serde_json::from_str(
                &std::fs::read_to_string(dir.join(format!("report-{k}.json"))).unwrap(),
            )
            .unwrap()
        })
        .collect()
}

#[test]
fn run_artifacts_are_consistent() {
    let root = tempfile::tempdir().unwrap();
    let out = root.path().join("a");
    small_run(root.path(), &out, "synthetic2", "mocbo", &[]);
    let reports = reports(&out, 2);
    for (k, r) in reports.iter().enumerate() {
        assert_eq!(r.log.len(), 2);
        assert_eq!(r.total_evaluations(), 2 * 5 + 2 * 5);
        let csv = std::fs::read_to_string(out.join(format!("front-{k}.csv"))).unwrap();
        assert_eq!(front_from_csv(&csv).unwrap(), r.front.points());
    }
    let file =
        aggregate_from_csv(&std::fs::read_to_string(out.join("aggregate.csv")).unwrap()).unwrap();
    let recomputed = aggregate(&reports);
    assert_eq!(file.len(), recomputed.len());
    let close = |a: Option<f64>, b: Option<f64>| match (a, b) {
        (Some(a), Some(b)) => (a - b).abs() <= 1e-12,
        (None, None) => true,
        _ => false,
    };
    for (a, b) in file.iter().zip(&recomputed) {
        assert_eq!(a.iteration, b.iteration);
        assert_eq!(a.evaluations, b.evaluations);
        assert!((a.intervention_count_median - b.intervention_count_median).abs() <= 1e-12);
        assert!(close(a.gd_median, b.gd_median) && close(a.gd_std, b.gd_std));
        assert!(close(a.igd_median, b.igd_median) && close(a.igd_std, b.igd_std));
    }
}

#[test]
fn compare_identical_runs_has_zero_deltas() {
    let root = tempfile::tempdir().unwrap();
    let a = root.path().join("a");
    small_run(root.path(), &a, "synthetic1", "mocbo", &[]);
    let table = ok(
        root.path(),
        &["compare", a.to_str().unwrap(), a.to_str().unwrap()],
    );
    let mut rows = csv::Reader::from_reader(table.as_bytes());
    let headers = rows.headers().unwrap().clone();
    let gd = headers.iter().position(|h| h == "gd_delta").unwrap();
    let igd = headers.iter().position(|h| h == "igd_delta").unwrap();
    let dominated = headers
        .iter()
        .position(|h| h == "dominated_by_first")
        .unwrap();
    for row in rows.records() {
        let row = row.unwrap();
        assert_eq!(row[gd].parse::<f64>().unwrap(), 0.0);
        assert_eq!(row[igd].parse::<f64>().unwrap(), 0.0);
        assert_eq!(row[dominated].parse::<f64>().unwrap(), 0.0);
    }
}

#[test]
fn compare_rejects_mismatched_problems() {
    let root = tempfile::tempdir().unwrap();
    let a = root.path().join("a");
    let b = root.path().join("b");
    small_run(root.path(), &a, "synthetic1", "mocbo", &["--no-reference"]);
    small_run(root.path(), &b, "synthetic2", "mocbo", &["--no-reference"]);
    let out = cli(
        root.path(),
        &["compare", a.to_str().unwrap(), b.to_str().unwrap()],
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn checkpointed_run_resumes_to_the_same_reports() {
    let root = tempfile::tempdir().unwrap();
    let direct = root.path().join("direct");
    let resumed = root.path().join("resumed");
    let base = |out: &Path, iters: &str, extra: &[&str]| {
        let mut args = vec![
            "run",
            "--problem",
            "synthetic1",
            "--mode",
            "baseline",
            "--iters",
            iters,
            "--seeds",
            "1",
            "--mc-samples",
            "500",
            "--no-reference",
            "--out",
            out.to_str().unwrap(),
        ];
        args.extend_from_slice(extra);
        ok(root.path(), &args);
    };
    base(&direct, "3", &[]);
    base(&resumed, "1", &["--checkpoint"]);
    base(&resumed, "3", &["--checkpoint"]);
    let a = std::fs::read_to_string(direct.join("report-0.json")).unwrap();
    let b = std::fs::read_to_string(resumed.join("report-0.json")).unwrap();
    assert_eq!(a, b);
    assert!(a.contains("\"mode\": \"baseline\""));
}
