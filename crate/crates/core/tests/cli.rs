use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn pgg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pgg"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn error_doc(out: &Output) -> Value {
    serde_json::from_slice(&out.stderr).expect("stderr carries an error document")
}

const UNIFORM_100: &str = r#"{"n_agents": 100, "rate": 1, "prior.kind": "uniform"}"#;

#[test]
fn solve_uniform_reaches_44() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "u.json", UNIFORM_100);
    let out = pgg(&["solve", "--config", cfg.to_str().unwrap()]);
    assert!(out.status.success());
    let doc: Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(doc["tau_star"], "44");
    assert_eq!(doc["converged"], true);
    assert_eq!(doc["is_equilibrium"], true);
    let profile = doc["profile"].as_array().unwrap();
    assert_eq!(profile.len(), 100);
    assert!(profile.iter().all(|t| t == 44));
    let trace = doc["trace"].as_array().unwrap();
    assert_eq!(
        trace.len(),
        doc["sweeps_used"].as_u64().unwrap() as usize + 1
    );
    assert!(trace[0].as_array().unwrap().iter().all(|t| t == 0));
}

#[test]
fn solve_binary_from_zeros_matches_dynamics() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        dir.path(),
        "b.json",
        r#"{"n_agents": 100, "rate": 0.001, "prior.kind": "binary",
            "prior.theta0": 50, "prior.theta1": 100, "prior.p0": 0.2}"#,
    );
    let out = pgg(&[
        "solve",
        "--config",
        cfg.to_str().unwrap(),
        "--schedule",
        "simultaneous",
    ]);
    assert!(out.status.success());
    let doc: Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(doc["schedule"], "simultaneous");
    assert_eq!(doc["converged"], true);
    assert_eq!(doc["is_equilibrium"], true);
}

#[test]
fn solve_rejects_misordered_prior() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        dir.path(),
        "bad.json",
        r#"{"n_agents": 100, "rate": 0.001, "prior.kind": "binary",
            "prior.theta0": 100, "prior.theta1": 50, "prior.p0": 0.2}"#,
    );
    let out = pgg(&["solve", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(error_doc(&out)["error"], "InvalidOrder");
}

#[test]
fn no_finite_cap_exits_with_numerical_code() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        dir.path(),
        "cap.json",
        r#"{"n_agents": 100, "rate": 0.001, "prior.kind": "binary",
            "prior.theta0": 50, "prior.theta1": 60, "prior.p0": 0.5, "init": "always"}"#,
    );
    let out = pgg(&["solve", "--config", cfg.to_str().unwrap()]);
    // "always" is not a profile document
    assert_eq!(out.status.code(), Some(1));

    let always = format!(
        r#"{{"n_agents": 100, "rate": 0.001, "prior.kind": "binary",
            "prior.theta0": 50, "prior.theta1": 60, "prior.p0": 0.5, "init": {}}}"#,
        serde_json::to_string(&vec!["always"; 100]).unwrap()
    );
    let cfg = write(dir.path(), "cap2.json", &always);
    let out = pgg(&["solve", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_doc(&out)["error"], "NoFiniteCap");
}

#[test]
fn unknown_config_keys_are_rejected() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        dir.path(),
        "x.json",
        r#"{"n_agents": 10, "rate": 1, "prior.kind": "uniform", "lambda": 2}"#,
    );
    let out = pgg(&["solve", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(error_doc(&out)["message"]
        .as_str()
        .unwrap()
        .contains("lambda"));
}

#[test]
fn table1_is_deterministic_csv() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("t.csv");
    let first = pgg(&["table1", "--out", path.to_str().unwrap()]);
    assert!(first.status.success());
    let written = std::fs::read_to_string(&path).unwrap();
    let second = pgg(&["table1"]);
    assert_eq!(stdout(&second), written);
    let lines: Vec<&str> = written.lines().collect();
    assert_eq!(lines[0], "p0,tau_star");
    assert_eq!(lines.len(), 6);
    assert!(lines[1].starts_with("0.1,"));
    assert!(lines[5].starts_with("0.5,"));
}

#[test]
fn multiplicity_histogram_is_reproducible() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        dir.path(),
        "m.json",
        r#"{"n_agents": 10, "rate": 1, "prior.kind": "uniform",
            "n_agents_list": [10, 20], "runs": 30, "init_geometric_p": 0.05}"#,
    );
    let cfg = cfg.to_str().unwrap();
    let out = pgg(&["multiplicity", "--config", cfg, "--seed", "5"]);
    assert!(out.status.success());
    let again = pgg(&["multiplicity", "--config", cfg, "--seed", "5"]);
    assert_eq!(out.stdout, again.stdout);
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("n_agents,tau_star,frequency"));
    let mut totals = std::collections::BTreeMap::new();
    for line in lines {
        let fields: Vec<&str> = line.split(',').collect();
        *totals.entry(fields[0].to_string()).or_insert(0) += fields[2].parse::<usize>().unwrap();
    }
    assert_eq!(totals.get("10"), Some(&30));
    assert_eq!(totals.get("20"), Some(&30));

    let missing = pgg(&["multiplicity", "--config", cfg]);
    assert_eq!(missing.status.code(), Some(1));
}

#[test]
fn multiplicity_single_run_gives_one_row_per_size() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        dir.path(),
        "m1.json",
        r#"{"n_agents": 10, "rate": 1, "prior.kind": "uniform",
            "n_agents_list": [10, 30, 50], "runs": 1, "seed": 11}"#,
    );
    let out = pgg(&["multiplicity", "--config", cfg.to_str().unwrap()]);
    assert!(out.status.success());
    assert_eq!(stdout(&out).lines().count(), 4);
}

#[test]
fn conditions_sweep_includes_reference_point() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        dir.path(),
        "c.json",
        r#"{"n_agents": 100, "rate": 0.001, "prior.kind": "binary",
            "prior.theta0": 50, "prior.theta1": 100,
            "p0_list": [0.1, 0.5], "rate_min": 1e-5, "rate_max": 0.1, "rate_points": 5}"#,
    );
    let out = pgg(&["conditions", "--config", cfg.to_str().unwrap()]);
    assert!(out.status.success());
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(
        lines.next(),
        Some("rate,p0,g,theta1_margin,existence,crossing_exists")
    );
    let rows: Vec<Vec<String>> = lines
        .map(|l| l.split(',').map(String::from).collect())
        .collect();
    assert_eq!(rows.len(), 10);
    let reference = rows
        .iter()
        .find(|r| (r[0].parse::<f64>().unwrap() - 1e-3).abs() < 1e-12 && r[1] == "0.5")
        .expect("grid contains rate 1e-3");
    assert!(reference[2].parse::<f64>().unwrap() > 16.0);
    assert_eq!(reference[3], "1.0");
    assert_eq!(reference[4], "true");
    // at the smallest rate g approaches N-1-E[Θ]
    let smallest = &rows[5];
    let mean = 0.5 * 50.0 + 0.5 * 100.0;
    assert!((smallest[2].parse::<f64>().unwrap() - (99.0 - mean)).abs() < 0.1);
}

#[test]
fn conditions_uniform_variant() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        dir.path(),
        "cu.json",
        r#"{"n_agents": 101, "rate": 1, "prior.kind": "uniform",
            "rate_min": 0.01, "rate_max": 1, "rate_points": 3}"#,
    );
    let out = pgg(&["conditions", "--config", cfg.to_str().unwrap()]);
    assert!(out.status.success());
    assert_eq!(
        stdout(&out).lines().collect::<Vec<_>>(),
        [
            "rate,rate_margin,crossing_exists",
            "0.01,-0.01,false",
            "0.1,0.08,true",
            "1.0,0.98,true"
        ]
    );
}

#[test]
fn verify_passes_by_default_and_fails_on_impossible_tolerance() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "v.json", r#"{"draws": 100}"#);
    let out = pgg(&["verify", "--config", cfg.to_str().unwrap(), "--seed", "2"]);
    assert!(out.status.success());
    let doc: Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(doc["pass"], true);
    let families = doc["families"].as_array().unwrap();
    let identity = families
        .iter()
        .find(|f| f["name"] == "identity_partial_sums")
        .unwrap();
    assert_eq!(identity["pass"], true);
    let derivative = families
        .iter()
        .find(|f| f["name"] == "cdf_theta_derivative")
        .unwrap();
    assert_eq!(derivative["pass"], true);
    assert_eq!(derivative["checks"], 100);

    let bad = write(
        dir.path(),
        "vb.json",
        r#"{"draws": 10, "derivative_tolerance": 1e-20, "seed": 2}"#,
    );
    let out = pgg(&["verify", "--config", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let doc: Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(doc["pass"], false);
}

#[test]
fn payoff_reports_exact_and_monte_carlo() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        dir.path(),
        "p.json",
        r#"{"n_agents": 4, "rate": 0.5, "prior.kind": "binary",
            "prior.theta0": 2, "prior.theta1": 5, "prior.p0": 0.4,
            "profile": [1, 2, 0, 3], "agent": 1, "samples": 200000, "k_cap": 20}"#,
    );
    let out = pgg(&["payoff", "--config", cfg.to_str().unwrap(), "--seed", "9"]);
    assert!(out.status.success());
    let doc: Value = serde_json::from_str(&stdout(&out)).unwrap();
    let exact = doc["exact"].as_f64().unwrap();
    let mean = doc["mc"]["mean"].as_f64().unwrap();
    let half = doc["mc"]["half_width_95"].as_f64().unwrap();
    assert!(half > 0.0 && (mean - exact).abs() < 5.0 * half);
    assert_eq!(doc["mc"]["samples"], 200000);
    let agents = doc["verification"]["agents"].as_array().unwrap();
    assert_eq!(agents.len(), 4);
    for key in ["agent", "tau_star", "worst_deviation_gap", "pass"] {
        assert!(agents[0].get(key).is_some(), "{key}");
    }

    let uniform = write(
        dir.path(),
        "pu.json",
        r#"{"n_agents": 4, "rate": 1, "prior.kind": "uniform"}"#,
    );
    let out = pgg(&[
        "payoff",
        "--config",
        uniform.to_str().unwrap(),
        "--seed",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(error_doc(&out)["error"], "WrongPrior");
}
