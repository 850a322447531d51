use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_string-sausage"));
    c.env_remove("STRING_SAUSAGE_THREADS");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn json(out: &Output) -> Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn survival_reports_estimate() {
    let out = run(&[
        "survival", "--hard", "--d", "2", "--J", "1", "--nu", "1", "--a", "0.3", "--T", "1", "--n", "2000", "--seed", "7",
    ]);
    let v = json(&out);
    let p = v["p_hat"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&p));
    assert!(v["stderr"].as_f64().unwrap() <= 0.5 / 2000f64.sqrt());
    assert_eq!(v["method"], "hard_direct");
    assert_eq!(v, json(&run(&[
        "survival", "--hard", "--d", "2", "--J", "1", "--nu", "1", "--a", "0.3", "--T", "1", "--n", "2000", "--seed", "7",
    ])));
}

#[test]
fn zero_intensity_survives() {
    let v = json(&run(&["survival", "--nu", "0", "--n", "100", "--seed", "1", "--method", "hard_via_volume"]));
    assert_eq!(v["p_hat"], 1.0);
}

#[test]
fn exit_statuses() {
    assert_eq!(run(&["bogus"]).status.code(), Some(2));
    assert_eq!(run(&["survival", "--n", "100"]).status.code(), Some(2));
    assert_eq!(run(&["survival", "--seed", "1", "--n", "10"]).status.code(), Some(2));
    assert_eq!(run(&["survival", "--seed", "1", "--a", "-1"]).status.code(), Some(2));
    assert_eq!(run(&["survival", "--seed", "1", "--n", "100", "--strict"]).status.code(), Some(3));
    assert_eq!(run(&["survival", "--seed", "1", "--soft", "2", "--method", "hard_direct"]).status.code(), Some(2));
}

#[test]
fn quenched_environment_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let env = dir.path().join("env.json");
    let env_arg = env.to_str().unwrap();
    let base = ["survival", "--nu", "0.5", "--T", "0.5", "--n", "200", "--seed", "3"];
    let first = json(&run(&[&base[..], &["--quenched", "--save-env", env_arg]].concat()));
    assert!(Path::new(&env).exists());
    let again = json(&run(&[&base[..], &["--env", env_arg]].concat()));
    assert_eq!(first["mode"], "quenched");
    assert_eq!(first["p_hat"], again["p_hat"]);
}

#[test]
fn scaling_check_reports_two_intervals() {
    let v = json(&run(&["scaling-check", "--J", "2", "--nu", "0.1", "--a", "0.4", "--n", "300", "--seed", "4"]));
    assert_eq!(v["native"]["ci95"].as_array().unwrap().len(), 2);
    assert_eq!(v["unit"]["ci95"].as_array().unwrap().len(), 2);
    assert!(v["overlap"].is_boolean());
    assert_eq!(v["scaled"]["h_scale"], 8.0);
}

#[test]
fn fit_recovers_square_root() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.csv");
    let mut text = String::from("T,neg_log_S\n");
    for t in [1.0f64, 2.0, 4.0, 8.0, 16.0] {
        text.push_str(&format!("{t},{}\n", 0.3 * t.sqrt()));
    }
    std::fs::write(&path, text).unwrap();
    let out = run(&["fit", path.to_str().unwrap()]);
    assert!(out.status.success());
    let stdout = String::from_utf8(out.stdout).unwrap();
    let row: Vec<&str> = stdout.lines().nth(1).unwrap().split(',').collect();
    assert!((row[1].parse::<f64>().unwrap() - 0.5).abs() < 1e-9);
    assert_eq!(row[5], "5");
}

#[test]
fn run_is_reproducible_across_workers() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("sweep.cfg");
    std::fs::write(
        &config,
        "experiment = survival\nseed = 9\nK = 8\nM = 32\ndt = 0.0625\nmethods = hard_direct\nn = 100\nnu = 0, 0.5\nT = 0.25, 0.5\n",
    )
    .unwrap();
    let csv1 = dir.path().join("a.csv");
    let csv2 = dir.path().join("b.csv");
    let json_path = dir.path().join("a.json");
    let c = config.to_str().unwrap();
    let a = run(&["--threads", "1", "run", c, "--csv", csv1.to_str().unwrap(), "--json", json_path.to_str().unwrap()]);
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    let b = bin()
        .env("STRING_SAUSAGE_THREADS", "3")
        .args(["run", c, "--csv", csv2.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(b.status.success());
    let text = std::fs::read_to_string(&csv1).unwrap();
    assert_eq!(text, std::fs::read_to_string(&csv2).unwrap());
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "experiment,d,J,nu,a,T,method,estimate,stderr,n,seed,resolution_tag");
    assert_eq!(lines.len(), 5);
    assert!(lines[1..3].iter().all(|l| l.split(',').nth(7) == Some("1")));
    let summary: Value = serde_json::from_str(&std::fs::read_to_string(json_path).unwrap()).unwrap();
    assert_eq!(summary["rows"].as_array().unwrap().len(), 4);
}

#[test]
fn simulate_and_sausage_emit_json() {
    let sim = json(&run(&["simulate", "--seed", "2", "--T", "0.25", "--dt", "0.0625"]));
    assert_eq!(sim["record"]["times"].as_array().unwrap().len(), 5);
    let sausage = json(&run(&["sausage", "--seed", "2", "--T", "0.25", "--method", "voxel", "--box-count", "1", "5"]));
    assert!(sausage["sausage"]["volume"].as_f64().unwrap() > 0.0);
    assert!(sausage["box_count"]["slope"].is_number());
}

#[test]
fn diagnostics_run_small() {
    let v = json(&run(&[
        "diagnostics", "--seed", "5", "--replicas", "500", "--box-modes", "32", "--box-grid", "1024", "--chain-runs", "3",
        "--chain-horizon", "20",
    ]));
    for key in ["brownian", "independence", "smoothing_held", "gspace", "box_count", "chain"] {
        assert!(!v[key].is_null(), "missing {key}");
    }
    assert_eq!(v["chain"]["invariant_failures"], 0);
}
