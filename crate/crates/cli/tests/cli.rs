use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use qmeter_core::comparison::{optimal_test_state, Scenario};

fn qmeter(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qmeter"))
        .args(args)
        .env_remove("QMETER_SEED")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn schema(name: &str) -> serde_json::Value {
    let path = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../docs")
        .join(name);
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn assert_valid(schema_name: &str, instance: &serde_json::Value) {
    let validator = jsonschema::validator_for(&schema(schema_name)).unwrap();
    let errors: Vec<String> = validator
        .iter_errors(instance)
        .map(|e| e.to_string())
        .collect();
    assert!(errors.is_empty(), "{errors:?}");
}

#[test]
fn verify_passes_with_enough_checks() {
    let out = qmeter(&["verify"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.lines().filter(|l| l.starts_with("[PASS]")).count() >= 30);
    assert!(text.contains("spec(Q123+Q124) = {2/3,4/3}"));
    assert!(!text.contains("[FAIL]"));
}

#[test]
fn verify_json_lists_checks() {
    let out = qmeter(&["verify", "--format", "json"]);
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let checks = report["checks"].as_array().unwrap();
    assert!(checks.len() >= 30);
    assert!(checks
        .iter()
        .all(|c| c["passed"] == true && c["basis"].is_string()));
}

#[test]
fn simulate_is_byte_identical_for_a_fixed_seed() {
    let dir = tempfile::tempdir().unwrap();
    let paths: Vec<String> = ["a.json", "b.json"]
        .iter()
        .map(|n| dir.path().join(n).to_str().unwrap().to_string())
        .collect();
    for (path, workers) in paths.iter().zip(["1", "3"]) {
        let out = qmeter(&[
            "simulate",
            "--seed",
            "42",
            "--trials",
            "30000",
            "--out",
            path,
            "--workers",
            workers,
        ]);
        assert_eq!(
            out.status.code(),
            Some(0),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
    assert_eq!(fs::read(&paths[0]).unwrap(), fs::read(&paths[1]).unwrap());
}

#[test]
fn simulate_output_matches_the_published_schema() {
    let out = qmeter(&[
        "simulate",
        "--seed",
        "7",
        "--trials",
        "5000",
        "--test-state",
        "kappa",
        "--kappa-index",
        "2",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let value: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_valid("campaign_result.schema.json", &value);
    assert_eq!(value["seed"], 7);
    assert!(value["version"].as_str().unwrap().starts_with("v0.1.0"));
    assert_eq!(value["config"]["test_state"]["kind"], "kappa");

    let out = qmeter(&[
        "simulate",
        "--seed",
        "7",
        "--trials",
        "5000",
        "--ground-truth",
        "equal",
    ]);
    let value: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_valid("campaign_result.schema.json", &value);
    assert!(value["different"].is_null());
    assert_eq!(value["false_positives"], 0);
}

#[test]
fn labeled_four_dimensional_estimate_is_near_one_quarter() {
    let out = qmeter(&[
        "simulate",
        "--seed",
        "42",
        "--trials",
        "100000",
        "--scenario",
        "labeled",
        "--dim",
        "4",
        "--ground-truth",
        "different",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let value: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let estimate = value["success_estimate"].as_f64().unwrap();
    let sigma = (0.25f64 * 0.75 / 100_000.0).sqrt();
    assert!((estimate - 0.25).abs() <= 3.0 * sigma, "{estimate}");
    assert!((value["analytic_success"].as_f64().unwrap() - 0.25).abs() < 1e-12);
}

#[test]
fn sweep_analytic_column_follows_the_angle_law() {
    let grid = format!(
        "0,{},{},{},{}",
        std::f64::consts::PI / 8.0,
        std::f64::consts::PI / 4.0,
        3.0 * std::f64::consts::PI / 8.0,
        std::f64::consts::PI / 2.0
    );
    let out = qmeter(&[
        "sweep",
        "--seed",
        "3",
        "--trials",
        "2000",
        "--theta-grid",
        &grid,
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = stdout(&out);
    assert!(!text.contains('\r'));
    let mut lines = text.lines();
    assert_eq!(
        lines.next(),
        Some("theta,trials,successes,empirical,analytic,standard_error")
    );
    let analytic: Vec<f64> = lines
        .map(|l| l.split(',').nth(4).unwrap().parse().unwrap())
        .collect();
    for (got, want) in analytic
        .iter()
        .zip([0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0 / 3.0, 0.0])
    {
        assert!((got - want).abs() < 1e-9, "{got} vs {want}");
    }
}

#[test]
fn report_renders_both_output_kinds() {
    let dir = tempfile::tempdir().unwrap();
    let json = dir.path().join("c.json");
    let csv = dir.path().join("s.csv");
    qmeter(&[
        "simulate",
        "--seed",
        "1",
        "--trials",
        "2000",
        "--out",
        json.to_str().unwrap(),
    ]);
    qmeter(&[
        "sweep",
        "--seed",
        "1",
        "--trials",
        "500",
        "--theta-grid",
        "0.2,0.4",
        "--out",
        csv.to_str().unwrap(),
    ]);
    let text = stdout(&qmeter(&["report", json.to_str().unwrap()]));
    assert!(text.contains("conclusive classes: same,diff | diff,same"));
    assert!(text.contains("false positives: 0"));
    let text = stdout(&qmeter(&["report", csv.to_str().unwrap()]));
    assert_eq!(text.lines().count(), 3);
}

#[test]
fn custom_state_file_is_accepted() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("state.json");
    let text = optimal_test_state(Scenario::UnlabeledQubit)
        .unwrap()
        .to_json_string()
        .unwrap();
    assert_valid(
        "test_state.schema.json",
        &serde_json::from_str(&text).unwrap(),
    );
    fs::write(&path, text).unwrap();
    let out = qmeter(&[
        "simulate",
        "--seed",
        "5",
        "--trials",
        "1000",
        "--test-state",
        "custom",
        "--state-file",
        path.to_str().unwrap(),
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn seed_falls_back_to_the_environment() {
    let out = Command::new(env!("CARGO_BIN_EXE_qmeter"))
        .args(["simulate", "--trials", "100"])
        .env("QMETER_SEED", "11")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let value: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(value["seed"], 11);
}

#[test]
fn usage_and_config_errors_exit_with_two() {
    assert_eq!(
        qmeter(&["simulate", "--trials", "10"]).status.code(),
        Some(2)
    );
    assert_eq!(
        qmeter(&["simulate", "--seed", "1", "--trials", "0"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        qmeter(&[
            "simulate",
            "--seed",
            "1",
            "--scenario",
            "unlabeled-qubit",
            "--dim",
            "3"
        ])
        .status
        .code(),
        Some(2)
    );
    assert_eq!(
        qmeter(&["simulate", "--seed", "1", "--test-state", "custom"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        qmeter(&[
            "simulate",
            "--seed",
            "1",
            "--scenario",
            "labeled",
            "--test-state",
            "kappa"
        ])
        .status
        .code(),
        Some(2)
    );
    assert_eq!(
        qmeter(&[
            "simulate",
            "--seed",
            "1",
            "--trials",
            "10",
            "--out",
            "/nonexistent/dir/out.json"
        ])
        .status
        .code(),
        Some(2)
    );
    assert_eq!(
        qmeter(&["report", "/nonexistent/file.json"]).status.code(),
        Some(2)
    );
    assert_eq!(
        qmeter(&["sweep", "--seed", "1", "--theta-grid", "0,abc"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn invalid_custom_state_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    fs::write(
        &path,
        r#"{"dim_local":2,"num_factors":2,"real":[[1,0,0,0],[0,1,0,0],[0,0,0,0],[0,0,0,0]]}"#,
    )
    .unwrap();
    let out = qmeter(&[
        "simulate",
        "--seed",
        "1",
        "--test-state",
        "custom",
        "--state-file",
        path.to_str().unwrap(),
        "--scenario",
        "labeled",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("trace"));
}
