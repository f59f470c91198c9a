//! End-to-end tests of the mixedbias binary: exit codes, report schema,
//! overrides, and determinism.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mixedbias"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn parse_report(output: &Output) -> serde_json::Value {
    serde_json::from_slice(&output.stdout).expect("stdout is a JSON report")
}

fn write_file(dir: &Path, name: &str, content: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, content).unwrap();
    path.to_string_lossy().into_owned()
}

const FIX4_CSV: &str = "a,l,y\n1,0,1\n0,0,2\n1,1,3\n0,1,4\n";

#[test]
fn verify_reproduces_the_worked_example_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_file(dir.path(), "fix4.csv", FIX4_CSV);
    let out = run(&[
        "verify",
        "--data",
        &data,
        "--functional",
        "cf-mean",
        "--bind",
        "a=a",
        "--bind",
        "l=l",
        "--bind",
        "y=y",
        "--basis",
        "intercept",
        "--nuisance-a",
        "coeffs:0",
        "--nuisance-b",
        "coeffs:2",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = parse_report(&out);
    for key in ["config", "estimates", "identities", "monte_carlo", "meta"] {
        assert!(report.get(key).is_some(), "missing top-level key {key}");
    }
    assert!(report["monte_carlo"].is_null());
    assert_eq!(report["identities"]["residuals"]["prop1"].as_f64().unwrap(), 0.0);
    assert_eq!(report["identities"]["pass"], true);
    assert_eq!(report["estimates"]["one_step"].as_f64().unwrap(), 5.0);
    assert!(report["identities"]["skipped"]["l2_collapse"]
        .as_str()
        .unwrap()
        .contains("degenerate"));
}

#[test]
fn missing_configuration_lists_every_violation_and_exits_2() {
    let out = run(&["estimate"]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("--data or --dgp"), "{stderr}");
    assert!(stderr.contains("--functional"), "{stderr}");
    assert!(stderr.contains("a-side basis"), "{stderr}");
    assert!(stderr.contains("b-side basis"), "{stderr}");
}

#[test]
fn unknown_flags_exit_2() {
    let out = run(&["estimate", "--bogus"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn dgp_estimate_without_n_exits_2() {
    let out = run(&[
        "estimate",
        "--dgp",
        "cf-mean-dgp",
        "--functional",
        "cf-mean",
        "--basis",
        "intercept",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("exactly one --n"));
}

#[test]
fn ragged_csv_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_file(dir.path(), "bad.csv", "a,l,y\n1,2,3\n4,5\n");
    let out = run(&[
        "estimate",
        "--data",
        &data,
        "--functional",
        "cf-mean",
        "--bind",
        "a=a",
        "--bind",
        "l=l",
        "--bind",
        "y=y",
        "--basis",
        "intercept",
    ]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("ragged row 2"));
}

/// A near-zero feature moment against an order-one imbalance makes γ about
/// 1e10; the augmented coefficients are then so large that evaluating the
/// collapsed estimator loses eight digits and the prop1 residual
/// genuinely exceeds tolerance. The report must say so and the process must
/// exit 1.
#[test]
fn amplified_gamma_fails_verification_and_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_file(
        dir.path(),
        "amplified.csv",
        "a,l,y\n1,-0.7,1\n0,0.3,2\n1,0.9,3\n0,-0.49999999996,4\n",
    );
    let out = run(&[
        "verify",
        "--data",
        &data,
        "--functional",
        "cf-mean",
        "--bind",
        "a=a",
        "--bind",
        "l=l",
        "--bind",
        "y=y",
        "--basis",
        "intercept,raw",
        "--nuisance-a",
        "coeffs:0,0,5",
        "--nuisance-b",
        "coeffs:0,0,1",
    ]);
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stderr));
    let report = parse_report(&out);
    assert_eq!(report["identities"]["pass"], false);
    let residual = report["identities"]["residuals"]["prop1"].as_f64().unwrap();
    let tolerance = report["identities"]["tolerances"]["prop1"].as_f64().unwrap();
    assert!(residual > tolerance, "residual {residual} <= {tolerance}");
}

#[test]
fn simulate_reports_are_identical_apart_from_the_timestamp() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("report.json");
    let run_once = || {
        let out = run(&[
            "simulate",
            "--dgp",
            "ecc-dgp",
            "--basis",
            "intercept,raw",
            "--n",
            "200,400",
            "--reps",
            "20",
            "--seed",
            "5",
            "--out",
            out_path.to_str().unwrap(),
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        assert!(out.stdout.is_empty());
        fs::read_to_string(&out_path).unwrap()
    };
    let first = run_once();
    let second = run_once();
    let strip = |text: &str| -> String {
        text.lines()
            .filter(|line| !line.contains("timestamp_unix_seconds"))
            .collect::<Vec<_>>()
            .join("\n")
    };
    assert_eq!(strip(&first), strip(&second));

    let report: serde_json::Value = serde_json::from_str(&first).unwrap();
    let runs = report["monte_carlo"].as_array().unwrap();
    assert_eq!(runs.len(), 2);
    assert_eq!(runs[0]["n"], 200);
    assert_eq!(runs[1]["n"], 400);
    assert!(report["estimates"].is_null() && report["identities"].is_null());
}

#[test]
fn config_file_values_are_used_and_flags_override_them() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_file(dir.path(), "fix4.csv", FIX4_CSV);
    let config = write_file(
        dir.path(),
        "run.json",
        &format!(
            r#"{{
                "functional": "cf-mean",
                "bind": {{"a": "a", "l": "l", "y": "y"}},
                "basis": "intercept,raw,interactions",
                "data": "{data}",
                "nuisance_a": "ols",
                "nuisance_b": "ols"
            }}"#
        ),
    );
    let out = run(&["estimate", "--config", &config, "--nuisance-b", "balanced"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = parse_report(&out);
    assert_eq!(report["config"]["basis_a"], "intercept,raw,interactions");
    assert_eq!(report["config"]["nuisance_b"], "balanced");
    assert_eq!(report["config"]["nuisance_a"], "ols");
}

#[test]
fn zero_nuisances_reduce_the_one_step_to_the_s0_mean() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_file(dir.path(), "fix4.csv", FIX4_CSV);
    let out = run(&[
        "estimate",
        "--data",
        &data,
        "--functional",
        "ecc",
        "--bind",
        "a=a",
        "--bind",
        "l=l",
        "--bind",
        "y=y",
        "--basis",
        "intercept",
        "--nuisance-a",
        "coeffs:0",
        "--nuisance-b",
        "coeffs:0",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = parse_report(&out);
    let one_step = report["estimates"]["one_step"].as_f64().unwrap();
    let s0_mean = report["estimates"]["s0_mean"].as_f64().unwrap();
    assert_eq!(one_step, 1.0);
    assert_eq!(one_step.to_bits(), s0_mean.to_bits());
}
