use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn slopegraph(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_slopegraph"))
        .args(args)
        .env("SLOPEGRAPH_LOG", "off")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = slopegraph(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_owned()
}

fn csv_shape(path: &Path) -> (usize, usize) {
    let text = fs::read_to_string(path).unwrap();
    assert!(!text.contains('\r'));
    let lines: Vec<&str> = text.lines().collect();
    (lines.len(), lines[0].split(',').count())
}

const GENERATE: &str = r#"{
  "network": {"structure": "cluster", "p": 50, "seed": 4},
  "n": 100
}"#;

#[test]
fn generate_writes_all_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "gen.json", GENERATE);
    let out = dir.path().join("out");
    ok(&["generate", &cfg, "--output-dir", s(&out)]);
    for name in ["sigma.csv", "theta.csv", "adjacency.csv"] {
        assert_eq!(csv_shape(&out.join(name)), (50, 50), "{name}");
    }
    let (rows, cols) = csv_shape(&out.join("data.csv"));
    assert_eq!(cols, 50);
    assert!(rows == 100 || rows == 101, "data.csv has {rows} lines");
    let meta: Value = serde_json::from_str(&fs::read_to_string(out.join("meta.json")).unwrap()).unwrap();
    assert_eq!(meta["config"]["n"], 100);
    assert!(meta["edge_count"].as_u64().unwrap() > 0);
}

#[test]
fn generate_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "gen.json", GENERATE);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    ok(&["generate", &cfg, "--output-dir", s(&a)]);
    ok(&["generate", &cfg, "--output-dir", s(&b)]);
    for name in ["sigma.csv", "theta.csv", "adjacency.csv", "data.csv", "meta.json"] {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name}");
    }
    let c = dir.path().join("c");
    ok(&["generate", &cfg, "--seed", "5", "--output-dir", s(&c)]);
    assert_ne!(fs::read(a.join("data.csv")).unwrap(), fs::read(c.join("data.csv")).unwrap());
}

#[test]
fn empty_graph_generates_identity_precision() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "gen.json",
        r#"{"network": {"structure": "random", "p": 5, "edge_prob": 1e-12, "seed": 1}, "n": 10}"#,
    );
    ok(&["generate", &cfg, "--output-dir", s(dir.path())]);
    let theta = fs::read_to_string(dir.path().join("theta.csv")).unwrap();
    for (i, line) in theta.lines().enumerate() {
        for (j, v) in line.split(',').enumerate() {
            let v: f64 = v.parse().unwrap();
            assert!((v - if i == j { 1.0 } else { 0.0 }).abs() < 1e-12);
        }
    }
    assert_eq!(fs::read_to_string(dir.path().join("adjacency.csv")).unwrap().matches('1').count(), 0);
}

#[test]
fn estimate_then_report_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "gen.json",
        r#"{"network": {"structure": "cluster", "p": 20, "seed": 2}, "n": 400}"#,
    );
    let truth = dir.path().join("truth");
    let est = dir.path().join("est");
    ok(&["generate", &cfg, "--output-dir", s(&truth)]);
    ok(&["estimate", s(&truth.join("data.csv")), "--estimator", "gslope", "--alpha", "0.1", "--output-dir", s(&est)]);
    assert_eq!(csv_shape(&est.join("theta_hat.csv")), (20, 20));
    assert_eq!(csv_shape(&est.join("support.csv")), (20, 20));
    let edges = fs::read_to_string(est.join("edges.csv")).unwrap();
    let mut lines = edges.lines();
    assert_eq!(lines.next(), Some("i,j"));
    for line in lines {
        let (i, j) = line.split_once(',').unwrap();
        let (i, j): (usize, usize) = (i.parse().unwrap(), j.parse().unwrap());
        assert!(1 <= i && i < j && j <= 20, "{line}");
    }
    let diag: Value = serde_json::from_str(&fs::read_to_string(est.join("diagnostics.json")).unwrap()).unwrap();
    assert_eq!(diag["converged"], true);
    assert_eq!(diag["estimator"], "gslope");

    let out = ok(&["report", "--estimate", s(&est), "--truth", s(&truth), "--output-dir", s(&est)]);
    let printed: Value = serde_json::from_slice(&out.stdout).unwrap();
    let written: Value = serde_json::from_str(&fs::read_to_string(est.join("metrics.json")).unwrap()).unwrap();
    assert_eq!(printed, written);
    let keys: Vec<&str> = printed.as_object().unwrap().keys().map(String::as_str).collect();
    for key in ["tp", "fp", "fn", "tn", "f1", "frobenius", "v_distant", "r_total", "dfdr", "fwer_event", "power"] {
        assert!(keys.contains(&key), "missing {key}");
    }
    assert!(printed["f1"].as_f64().unwrap() > 0.5);
}

#[test]
fn null_data_gives_no_edges() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "gen.json",
        r#"{"network": {"structure": "random", "p": 8, "edge_prob": 1e-12, "seed": 3}, "n": 300}"#,
    );
    ok(&["generate", &cfg, "--output-dir", s(dir.path())]);
    let est = dir.path().join("est");
    ok(&["estimate", s(&dir.path().join("data.csv")), "--estimator", "glasso-bonferroni", "--output-dir", s(&est)]);
    assert_eq!(fs::read_to_string(est.join("edges.csv")).unwrap(), "i,j\n");
}

#[test]
fn tslope_estimate_reports_em_iterations() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "gen.json",
        r#"{"network": {"structure": "cluster", "p": 10, "seed": 6}, "n": 150,
            "distribution": {"kind": "student", "nu": 4}}"#,
    );
    ok(&["generate", &cfg, "--output-dir", s(dir.path())]);
    let est = dir.path().join("est");
    ok(&["estimate", s(&dir.path().join("data.csv")), "--estimator", "tslope", "--nu", "4", "--output-dir", s(&est)]);
    let diag: Value = serde_json::from_str(&fs::read_to_string(est.join("diagnostics.json")).unwrap()).unwrap();
    assert!(diag["em_iterations"].as_u64().unwrap() >= 1);
    assert_eq!(diag["converged"], true);
}

const SIMULATE: &str = r#"{
  "network": {"structure": "cluster", "p": 12, "seed": 9},
  "n": 60,
  "estimator": "gslope",
  "tuning": {"scheme": "holm", "alpha": 0.1},
  "replications": 6,
  "master_seed": 77
}"#;

#[test]
fn simulate_is_deterministic_across_runs_and_jobs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "sim.json", SIMULATE);
    let runs = [("a", "1"), ("b", "1"), ("c", "4")];
    for (name, jobs) in runs {
        ok(&["simulate", &cfg, "--jobs", jobs, "--output-dir", s(&dir.path().join(name))]);
    }
    for name in ["report.json", "replications.csv"] {
        let a = fs::read(dir.path().join("a").join(name)).unwrap();
        assert_eq!(a, fs::read(dir.path().join("b").join(name)).unwrap(), "{name}");
        assert_eq!(a, fs::read(dir.path().join("c").join(name)).unwrap(), "{name}");
    }
    let report: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("a/report.json")).unwrap()).unwrap();
    assert_eq!(report["replications"], 6);
    assert_eq!(csv_shape(&dir.path().join("a/replications.csv")).0, 7);
}

#[test]
fn unknown_config_key_exits_2_with_line_number() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "gen.json",
        "{\n  \"network\": {\"structure\": \"cluster\", \"p\": 10, \"seed\": 1},\n  \"n\": 10,\n  \"bogus\": 1\n}\n",
    );
    let out = slopegraph(&["generate", &cfg, "--output-dir", s(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 4"), "{err}");
    assert!(err.contains("bogus"), "{err}");
}

#[test]
fn ragged_csv_exits_2_with_row_number() {
    let dir = tempfile::tempdir().unwrap();
    let data = write(dir.path(), "data.csv", "a,b,c\n1,2,3\n4,5\n7,8,9\n");
    let out = slopegraph(&["estimate", &data, "--output-dir", s(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 3"), "{err}");
}

#[test]
fn missing_input_and_bad_values_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.csv");
    assert_eq!(slopegraph(&["estimate", s(&missing)]).status.code(), Some(2));
    let data = write(dir.path(), "data.csv", "1,2\n3,4\n5,7\n");
    let out = slopegraph(&["estimate", &data, "--estimator", "tslope", "--nu", "1.5", "--output-dir", s(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
    let out = slopegraph(&["estimate", &data, "--alpha", "2", "--output-dir", s(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn non_finite_data_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let data = write(dir.path(), "data.csv", "1,2\nNaN,4\n5,7\n");
    let out = slopegraph(&["estimate", &data, "--output-dir", s(dir.path())]);
    assert_ne!(out.status.code(), Some(0));
}
