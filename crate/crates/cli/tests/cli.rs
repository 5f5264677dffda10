//! End-to-end tests against the built binary: exit codes, JSON/CSV output,
//! determinism across thread counts, and the documented flag surface.

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_robustlab"));
    // Keep the harness environment from leaking into thread-count tests.
    c.env_remove("ROBUSTLAB_THREADS");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout_json(out: &Output) -> serde_json::Value {
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn write_file(path: &Path, body: &str) {
    std::fs::write(path, body).unwrap();
}

fn experiment_config(dir: &Path, out_name: &str) -> String {
    format!(
        r#"{{
  "estimators": [{{"id": "subg"}}, {{"id": "median_of_means", "blocks": 4}}],
  "sample": {{
    "family": {{"family": "gaussian"}},
    "mean": [0.0, 0.0],
    "covariance": {{"shape": "spherical", "variance": 1.0}},
    "d": 2,
    "n": 60
  }},
  "grid": {{"grid": "delta", "values": [0.1]}},
  "trials": 2,
  "seed": 9,
  "out": {:?}
}}"#,
        dir.join(out_name)
    )
}

#[test]
fn estimate_empirical_mean_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data.csv");
    write_file(&data, "0.0,1.0\n2.0,3.0\n4.0,5.0\n");
    let out = run(&[
        "estimate",
        "--estimator",
        "empirical_mean",
        data.to_str().unwrap(),
    ]);
    let doc = stdout_json(&out);
    assert_eq!(doc["estimator"], "empirical_mean");
    assert_eq!(doc["n"], 3);
    assert_eq!(doc["d"], 2);
    assert_eq!(doc["estimate"][0], 2.0);
    assert_eq!(doc["estimate"][1], 3.0);
}

#[test]
fn estimate_writes_the_same_json_to_out() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data.csv");
    write_file(&data, "1.5\n2.5\n");
    let out_path = dir.path().join("est.json");
    let out = run(&[
        "estimate",
        "--estimator",
        "trimmed_mean:10",
        "--out",
        out_path.to_str().unwrap(),
        data.to_str().unwrap(),
    ]);
    let doc = stdout_json(&out);
    let on_disk: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out_path).unwrap()).unwrap();
    assert_eq!(doc, on_disk);
}

#[test]
fn unknown_estimator_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data.csv");
    write_file(&data, "1\n");
    let out = run(&["estimate", "--estimator", "bogus", data.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("usage"));
}

#[test]
fn missing_dataset_exits_1_with_path() {
    let out = run(&[
        "estimate",
        "--estimator",
        "empirical_mean",
        "/no/such/robustlab_data.csv",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("robustlab_data.csv"));
}

#[test]
fn malformed_dataset_exits_2_with_row() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data.csv");
    write_file(&data, "1.0,2.0\n3.0\n");
    let out = run(&[
        "estimate",
        "--estimator",
        "empirical_mean",
        data.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("row 2"), "{err}");
}

#[test]
fn experiment_is_byte_identical_across_runs_and_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    write_file(&cfg, &experiment_config(dir.path(), "a.csv"));
    let out = run(&[
        "experiment",
        "--config",
        cfg.to_str().unwrap(),
        "--threads",
        "1",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let b_path = dir.path().join("b.csv");
    let out2 = run(&[
        "experiment",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        b_path.to_str().unwrap(),
        "--threads",
        "2",
    ]);
    assert!(out2.status.success());
    let a = std::fs::read(dir.path().join("a.csv")).unwrap();
    let b = std::fs::read(&b_path).unwrap();
    assert!(!a.is_empty());
    assert_eq!(a, b, "records must not depend on the pool size");
    // Sidecar carries the config.
    let side: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("a.json")).unwrap())
            .unwrap();
    assert_eq!(side["config"]["seed"], 9);
    assert_eq!(side["records"], 6);
}

#[test]
fn env_var_overrides_threads_flag() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    write_file(&cfg, &experiment_config(dir.path(), "a.csv"));
    let out = bin()
        .args(["experiment", "--config", cfg.to_str().unwrap(), "--threads", "2"])
        .env("ROBUSTLAB_THREADS", "1")
        .output()
        .unwrap();
    assert!(out.status.success());
    let bad = bin()
        .args(["experiment", "--config", cfg.to_str().unwrap()])
        .env("ROBUSTLAB_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("ROBUSTLAB_THREADS"));
}

#[test]
fn seed_override_changes_the_records() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    write_file(&cfg, &experiment_config(dir.path(), "a.csv"));
    run(&["experiment", "--config", cfg.to_str().unwrap()]);
    let b_path = dir.path().join("b.csv");
    run(&[
        "experiment",
        "--config",
        cfg.to_str().unwrap(),
        "--seed",
        "1234",
        "--out",
        b_path.to_str().unwrap(),
    ]);
    let a = std::fs::read(dir.path().join("a.csv")).unwrap();
    let b = std::fs::read(&b_path).unwrap();
    assert_ne!(a, b);
}

#[test]
fn experiment_plot_emits_svg() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    write_file(&cfg, &experiment_config(dir.path(), "a.csv"));
    let svg_path = dir.path().join("chart.svg");
    let out = run(&[
        "experiment",
        "--config",
        cfg.to_str().unwrap(),
        "--plot",
        svg_path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let svg = std::fs::read_to_string(&svg_path).unwrap();
    assert!(svg.starts_with("<svg"));
    assert!(svg.contains("subg"));
    assert!(svg.contains("envelope"));
}

#[test]
fn malformed_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    write_file(&cfg, "{ not json");
    let out = run(&["experiment", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn separation_demo_writes_report_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sep.json");
    let report_path = dir.path().join("report.json");
    write_file(
        &cfg,
        &format!(
            r#"{{
  "sample": {{
    "family": {{"family": "gaussian"}},
    "mean": [0.0, 0.0],
    "covariance": {{"shape": "spherical", "variance": 1.0}},
    "d": 2,
    "n": 40
  }},
  "eps": 0.1,
  "r_values": [0.0, 20.0],
  "trials": 2,
  "c1": 0.2,
  "seed": 1,
  "out": {report_path:?}
}}"#
        ),
    );
    let svg_path = dir.path().join("sep.svg");
    let out = run(&[
        "separation-demo",
        "--config",
        cfg.to_str().unwrap(),
        "--plot",
        svg_path.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("stable set:"), "{text}");
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report_path).unwrap()).unwrap();
    assert_eq!(report["summaries"].as_array().unwrap().len(), 2);
    assert_eq!(report["stable"]["trials"], 2);
    assert_eq!(report["rows"].as_array().unwrap().len(), 4);
    assert!(std::fs::read_to_string(&svg_path)
        .unwrap()
        .starts_with("<svg"));
}

#[test]
fn theorycheck_binomial_reports_the_known_violations() {
    let out = run(&["theorycheck", "binomial", "--n-max", "6"]);
    let doc = stdout_json(&out);
    assert_eq!(doc["checks"], 6 * 99);
    let violations = doc["violations"].as_array().unwrap();
    assert!(!violations.is_empty());
    assert!(violations.iter().any(|v| v["n"] == 4));
}

#[test]
fn theorycheck_blowup_is_clean_on_moderate_sets() {
    let out = run(&[
        "theorycheck",
        "blowup",
        "--n",
        "10",
        "--sets",
        "5",
        "--eps",
        "0.1,0.2",
    ]);
    let doc = stdout_json(&out);
    assert_eq!(doc["sets"], 5);
    assert_eq!(doc["violations"].as_array().unwrap().len(), 0);
}

#[test]
fn theorycheck_reduction_runs_a_job_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("job.json");
    write_file(
        &cfg,
        r#"{
  "estimator": "empirical_mean",
  "sample": {
    "family": {"family": "gaussian"},
    "mean": [0.0, 0.0],
    "covariance": {"shape": "spherical", "variance": 1.0},
    "d": 2,
    "n": 20
  },
  "eps": 0.0,
  "n_grid": [20, 40],
  "trials": 20,
  "envelope_mult": 10.0,
  "seed": 1
}"#,
    );
    let out = run(&["theorycheck", "reduction", "--config", cfg.to_str().unwrap()]);
    let doc = stdout_json(&out);
    assert_eq!(doc["rows"].as_array().unwrap().len(), 2);
    assert_eq!(doc["rows"][0]["failures"], 0);
}
