use std::process::{Command, Output};

use serde_json::Value;

fn bosegas(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bosegas")).args(args).env_remove("BOSEGAS_THREADS").output().expect("binary runs")
}

fn report(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("JSON report on stdout")
}

#[test]
fn help_exits_zero() {
    let out = bosegas(&["--help"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("pathspace"));
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(bosegas(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(bosegas(&["thermo", "--beta", "-1"]).status.code(), Some(2));
    assert_eq!(bosegas(&["pathspace", "--check", "nope"]).status.code(), Some(2));
    assert_eq!(bosegas(&["thermo", "--format", "csv"]).status.code(), Some(2));
}

#[test]
fn thermo_reports_critical_density_and_bec() {
    let out = bosegas(&["thermo", "--d", "3", "--s", "2", "--beta", "1", "--rho-bar", "0.1172"]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    let rho_c = r["results"]["critical"]["rho_c"].as_f64().unwrap();
    assert!((rho_c - 0.058_643_6).abs() < 1e-6, "rho_c = {rho_c}");
    assert_eq!(r["results"]["verdict"], "bec");
    assert_eq!(r["seed"], r["config"]["seed"]);
    assert!(r["timing"]["elapsed_s"].is_number());
}

#[test]
fn matsubara_check_passes() {
    let out = bosegas(&["pathspace", "--check", "matsubara", "--beta", "1", "--eps", "1", "--N", "10000"]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    for row in r["results"].as_array().unwrap() {
        assert!(row["relative_gap"].as_f64().unwrap() <= 1e-4);
    }
}

#[test]
fn failed_check_exits_one() {
    // Component factorization at s = 2 is too slow for u = 1e3.
    let out = bosegas(&["clustering", "--form", "component", "--s", "2"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(report(&out)["passed"], false);
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"thermo": {"beta": 2.0, "rho_bar": 0.2, "l_chain": [4, 8]}}"#).unwrap();
    let out = bosegas(&["thermo", "--config", cfg.to_str().unwrap(), "--beta", "1"]);
    assert_eq!(out.status.code(), Some(0));
    let c = &report(&out)["config"];
    assert_eq!(c["beta"], 1.0);
    assert_eq!(c["rho_bar"], 0.2);
    assert_eq!(c["l_chain"].as_array().unwrap().len(), 2);

    std::fs::write(&cfg, r#"{"betta": 2.0}"#).unwrap();
    assert_eq!(bosegas(&["thermo", "--config", cfg.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn reports_are_reproducible_apart_from_timing() {
    let dir = tempfile::tempdir().unwrap();
    let mut bodies = Vec::new();
    for name in ["a.json", "b.json"] {
        let path = dir.path().join(name);
        let out = bosegas(&["pathspace", "--check", "sample", "--samples", "2000", "--seed", "7", "-o", path.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(0));
        let mut v: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
        v.as_object_mut().unwrap().remove("timing");
        bodies.push(serde_json::to_string(&v).unwrap());
    }
    assert_eq!(bodies[0], bodies[1]);
}

#[test]
fn samples_export_as_csv() {
    let out = bosegas(&["pathspace", "--check", "sample", "--format", "csv", "--samples", "3", "--n-mats", "1"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("sample,n,k0,k1,k2,re,im"));
    assert!(lines.all(|l| l.split(',').count() == 7));
}

#[test]
fn order_param_below_critical_density() {
    let out = bosegas(&["order-param", "--rho-bar", "0.03"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(report(&out)["results"]["verdict"], "no_bec");
}

#[test]
fn quasilocal_chain_is_consistent() {
    let out = bosegas(&["quasilocal", "--chain", "1,2,2", "--samples", "20000"]);
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn suite_subset_runs() {
    let out = bosegas(&["all", "--only", "1,2,9"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(report(&out)["results"].as_array().unwrap().len(), 3);
}
