//! The binary end to end: exit codes, report files, CSV series, config files.

use serde_json::Value;
use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_be-workbench"));
    c.env_remove("BE_WORKBENCH_OUT");
    c
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("be-workbench-{}-{name}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is a json report")
}

fn check<'a>(report: &'a Value, name: &str) -> &'a Value {
    report["checks"]
        .as_array()
        .unwrap()
        .iter()
        .find(|c| c["check"] == name)
        .unwrap_or_else(|| panic!("no check {name}"))
}

#[test]
fn curvature_of_poisson_passes() {
    let out = bin().args(["curvature", "poisson:2"]).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let r = json(&out);
    assert_eq!(r["command"], "curvature");
    assert_eq!(r["passed"], true);
    let c = r["result"]["c_inf"].as_f64().unwrap();
    assert!((c - 0.5).abs() < 1e-12);
}

#[test]
fn failing_check_exits_two_and_still_reports() {
    // c = 1 is far above the curvature 1/2 of Π_2
    let out = bin()
        .args(["verify", "lsi", "--dist", "poisson:2", "--f", "exp:0.5", "--c", "1"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let r = json(&out);
    assert_eq!(r["passed"], false);
    assert_eq!(check(&r, "lsi")["passed"], false);
    assert_eq!(check(&r, "lsi_decomposition")["passed"], true);
    assert!(String::from_utf8_lossy(&out.stderr).contains("check failed: lsi"));
}

#[test]
fn usage_errors_exit_one() {
    for args in [
        vec!["curvature", "bogus:1"],
        vec!["curvature", "poisson:-1"],
        vec!["evolve", "--dist", "poisson:1"],
        vec!["no-such-command"],
        vec!["verify", "lsi", "--dist", "poisson:1", "--f", "exp"],
    ] {
        let out = bin().args(&args).output().unwrap();
        assert_eq!(out.status.code(), Some(1), "{args:?}");
        assert!(out.stdout.is_empty(), "{args:?}");
    }
}

#[test]
fn help_exits_zero() {
    let out = bin().arg("--help").output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("curvature"));
}

#[test]
fn output_flag_and_env_directory() {
    let dir = scratch("out");
    let path = dir.join("report.json");
    let out = bin()
        .args([
            "constants",
            "--dist",
            "bernoullisum:0.3,0.6",
            "--restarts",
            "2",
            "--output",
        ])
        .arg(&path)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let r: Value = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(r["command"], "constants");

    let out = bin()
        .env("BE_WORKBENCH_OUT", &dir)
        .args([
            "verify",
            "poincare",
            "--dist",
            "poisson:3",
            "--c",
            "auto",
            "--trials",
            "20",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let r: Value = serde_json::from_str(&fs::read_to_string(dir.join("verify-poincare.json")).unwrap()).unwrap();
    assert_eq!(r["passed"], true);
}

#[test]
fn decay_csv_has_fixed_columns() {
    let dir = scratch("csv");
    let path = dir.join("decay.csv");
    let out = bin()
        .args([
            "decay",
            "--lambda",
            "2",
            "--init",
            "bernoullisum:0.2,0.9",
            "--t",
            "0.1,1,4",
            "--csv",
        ])
        .arg(&path)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = fs::read_to_string(&path).unwrap();
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    assert_eq!(rdr.headers().unwrap(), vec!["t", "value", "bound", "margin"]);
    let rows: Vec<Vec<f64>> = rdr
        .records()
        .map(|r| r.unwrap().iter().map(|s| s.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 3);
    for r in &rows {
        assert!(r[1] <= r[2]);
        assert!((r[3] - (r[2] - r[1])).abs() < 1e-15);
    }
}

#[test]
fn config_file_overrides_flags() {
    let dir = scratch("cfg");
    let cfg = dir.join("run.conf");
    fs::write(&cfg, "# settings\nseed = 9\n").unwrap();
    let out = bin()
        .args(["--seed", "1", "--config"])
        .arg(&cfg)
        .args([
            "verify",
            "poincare",
            "--dist",
            "poisson:1",
            "--c",
            "auto",
            "--trials",
            "5",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(json(&out)["settings"]["common"]["seed"], 9);

    fs::write(&cfg, "this line has no equals sign\n").unwrap();
    let out = bin()
        .arg("--config")
        .arg(&cfg)
        .args(["curvature", "poisson:1"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn charlier_trace_is_flat() {
    let out = bin().args(["hyper", "--lambda", "2"]).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(check(&json(&out), "charlier_flat")["passed"], true);
}

#[test]
fn multidim_certify_product() {
    let out = bin()
        .args(["multidim", "certify", "--dists", "poisson:2,poisson:4", "--c", "auto"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(check(&json(&out), "esym_psd")["passed"], true);
}
