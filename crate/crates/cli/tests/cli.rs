use std::fs;
use std::process::{Command, Output};

use serde_json::Value;

fn gapforge(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gapforge")).args(args).env_remove("GAPFORGE_SEED").output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap()
}

#[test]
fn long_range_kmp_gap_is_four_ninths() {
    let o = gapforge(&["gap", "--model", "star", "--m", "0", "--gamma", "1", "--N", "3", "--topology", "long-range", "--method", "galerkin"]);
    assert!(o.status.success());
    let v: f64 = stdout(&o).trim().parse().unwrap();
    assert!((v - 4.0 / 9.0).abs() < 1e-12, "{v}");
}

#[test]
fn gap_json_records_parameters_and_defaults() {
    let o = gapforge(&["gap", "--model", "star", "--m", "1", "--N", "2", "--E", "2", "--json"]);
    assert!(o.status.success());
    let r = json(&o);
    assert!((r["gap"].as_f64().unwrap() - 4.0).abs() < 1e-8);
    assert_eq!(r["params"]["N"], 2);
    assert_eq!(r["params"]["topology"], "nn");
    let defaults: Vec<&str> = r["defaults"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
    assert!(defaults.contains(&"gamma") && defaults.contains(&"degree") && !defaults.contains(&"E"));
}

#[test]
fn seed_comes_from_the_environment() {
    let o = Command::new(env!("CARGO_BIN_EXE_gapforge"))
        .args(["gap", "--N", "2", "--json"])
        .env("GAPFORGE_SEED", "77")
        .output()
        .unwrap();
    assert_eq!(json(&o)["params"]["seed"], 77);
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    fs::write(&cfg, r#"{"schema": 1, "command": "gap", "model": "star", "m": 0, "N": 3, "topology": "lr", "seed": 5}"#).unwrap();
    let o = gapforge(&["gap", "--config", cfg.to_str().unwrap(), "--json"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = json(&o);
    assert!((r["gap"].as_f64().unwrap() - 4.0 / 9.0).abs() < 1e-12);
    assert_eq!(r["params"]["seed"], 5);
    let o = gapforge(&["gap", "--config", cfg.to_str().unwrap(), "--topology", "nn", "--json"]);
    assert!((json(&o)["gap"].as_f64().unwrap() - 0.5).abs() < 1e-10);
}

#[test]
fn config_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    fs::write(&cfg, r#"{"schema": 1, "N": 3, "colour": "blue"}"#).unwrap();
    assert_eq!(gapforge(&["gap", "--config", cfg.to_str().unwrap()]).status.code(), Some(1));
    fs::write(&cfg, r#"{"schema": 9, "N": 3}"#).unwrap();
    assert_eq!(gapforge(&["gap", "--config", cfg.to_str().unwrap()]).status.code(), Some(1));
    fs::write(&cfg, r#"{"schema": 1, "command": "sweep", "N": 3}"#).unwrap();
    assert_eq!(gapforge(&["gap", "--config", cfg.to_str().unwrap()]).status.code(), Some(1));
    assert_eq!(gapforge(&["gap", "--model", "nope", "--N", "3"]).status.code(), Some(1));
    assert_eq!(gapforge(&["gap", "--model", "star"]).status.code(), Some(1));
    assert_eq!(gapforge(&["gap", "--N", "3", "--gamma", "-1"]).status.code(), Some(1));
    assert_eq!(gapforge(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(gapforge(&["path", "--i", "3", "--j", "2"]).status.code(), Some(1));
}

#[test]
fn ill_conditioned_basis_exits_with_two() {
    let o = gapforge(&["gap", "--N", "3", "--degree", "12", "--precision", "f64"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn sweep_csv_is_stable_and_ordered() {
    let args = ["sweep", "--model", "star", "--m", "0,1", "--N", "2,3", "--topology", "nn,lr"];
    let a = gapforge(&args);
    let b = gapforge(&["--jobs", "2", args[0], args[1], args[2], args[3], args[4], args[5], args[6], args[7], args[8]]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let text = stdout(&a);
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "model,m,gamma,E,N,topology,method,degree_or_budget,gap,err,seed");
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 8);
    assert_eq!((rows[3][0], rows[3][4], rows[3][5]), ("kmp", "3", "lr"));
    let v: f64 = rows[3][8].parse().unwrap();
    assert!((v - 4.0 / 9.0).abs() < 1e-12);
    for r in &rows {
        assert_eq!(r.len(), 11);
        if r[8] != "0" {
            assert_eq!(r[8].split('e').next().unwrap().replace(['-', '.'], "").len(), 17);
        }
    }
}

#[test]
fn sweep_run_directory_resumes() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run");
    let r = run.to_str().unwrap();
    assert!(gapforge(&["sweep", "--m", "1", "--N", "2,3", "--run-dir", r]).status.success());
    assert!(gapforge(&["sweep", "--m", "1", "--N", "2,3,4", "--run-dir", r]).status.success());
    let csv = fs::read_to_string(run.join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
    let manifest: Value = serde_json::from_str(&fs::read_to_string(run.join("manifest.json")).unwrap()).unwrap();
    let runs = manifest.as_array().unwrap();
    assert_eq!(runs.len(), 2);
    assert_eq!((runs[1]["rows_written"].as_u64(), runs[1]["rows_skipped"].as_u64()), (Some(1), Some(2)));
}

#[test]
fn two_site_gg2_constant() {
    let o = gapforge(&["two-site", "--model", "gg2"]);
    assert!(o.status.success());
    assert!(json(&o)["value"].as_f64().unwrap() >= (1.0 / (2.0 * std::f64::consts::PI)).sqrt());
}

#[test]
fn kappa_reports_both_routes() {
    let o = gapforge(&["kappa", "--m", "2", "--gamma", "1", "--degree", "6"]);
    assert!(o.status.success());
    let r = json(&o);
    let e = r["values"]["kappa"]["expansion"]["value"].as_f64().unwrap();
    let p = r["values"]["kappa"]["pair_factorized"]["value"].as_f64().unwrap();
    assert!((e - p).abs() < 1e-8 * e);
    assert!(r["bracket"].is_null());
}

#[test]
fn kappa_lower_bound_exceeds_a_third() {
    let o = gapforge(&["kappa", "--m", "1", "--gamma", "1"]);
    assert!(o.status.success());
    let lower = json(&o)["bracket"]["lower"].as_f64().unwrap();
    assert!(lower > 1.0 / 3.0, "lower bound {lower}");
}

#[test]
fn path_printout() {
    let o = gapforge(&["path", "--i", "1", "--j", "3"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("sites: 1 2 3 1 2 3"));
    assert!(text.contains("result: 3 2 1"));
    let o = gapforge(&["path", "--i", "2", "--j", "9", "--json"]);
    assert!(json(&o)["report"]["pass"].as_bool().unwrap());
}

#[test]
fn simulate_writes_snapshots() {
    let run = |seed: &str| gapforge(&["simulate", "--N", "4", "--m", "1", "--t-max", "2", "--stride", "0.5", "--seed", seed]);
    let (a, b) = (run("3"), run("3"));
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let text = stdout(&a);
    assert_eq!(text.lines().next().unwrap(), "time,x_1,x_2,x_3,x_4");
    for line in text.lines().skip(1) {
        let total: f64 = line.split(',').skip(1).map(|v| v.parse::<f64>().unwrap()).sum();
        assert!((total - 4.0).abs() < 1e-10);
    }
}

#[test]
fn verify_theorems_passes_and_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("summary.csv");
    let o = gapforge(&["verify", "--suite", "theorems", "--csv", csv.to_str().unwrap(), "--mc-samples", "50000"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = json(&o);
    assert!(r["pass"].as_bool().unwrap());
    assert!(r["paths"]["all_pass"].as_bool().unwrap());
    let summary = fs::read_to_string(csv).unwrap();
    assert!(summary.starts_with("claim,model,m,gamma,E,N,resolution,lhs,rhs,margin,status,pass"));
}

#[test]
fn verify_all_exits_zero() {
    let o = gapforge(&["verify", "--suite", "all", "--mc-samples", "50000"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
}
