use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use lsabr_core::semigroups::price_zero_volvol;
use lsabr_core::ModelParams;
use tempfile::TempDir;

fn lsabr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lsabr")).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

/// Data rows of a CSV with `#` comment lines, header dropped.
fn rows(text: &str) -> Vec<Vec<f64>> {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect()
}

fn meta(text: &str, key: &str) -> String {
    let prefix = format!("# {key}=");
    text.lines().find_map(|l| l.strip_prefix(&prefix)).unwrap_or_else(|| panic!("no {key}")).to_string()
}

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("run.cfg");
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn params() -> ModelParams {
    ModelParams::study_default().with_nu(0.2)
}

#[test]
fn price_at_zero_time_is_the_payoff() {
    let o = lsabr(&["price", "--t", "0", "--strike", "0.9"]);
    assert_eq!(code(&o), 0);
    let r = rows(&stdout(&o));
    assert_eq!(r.len(), 12 * 41);
    for row in r {
        assert_eq!(row[3], (row[1].exp() - 0.9).max(0.0));
    }
}

#[test]
fn price_point_and_grid_match_library_bits() {
    let o = lsabr(&["price", "--sigma", "0.4", "--x", "0", "--t", "1", "--strike", "1"]);
    assert_eq!(code(&o), 0);
    let r = rows(&stdout(&o));
    assert_eq!(r.len(), 1);
    assert_eq!(r[0][3].to_bits(), price_zero_volvol(&params(), 1.0, 1.0, 0.4, 0.0).unwrap().to_bits());

    let dir = TempDir::new().unwrap();
    let out = dir.path().join("prices.csv");
    let o = lsabr(&["price", "--t", "0.7", "--strike", "1.1", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    for row in rows(&fs::read_to_string(&out).unwrap()) {
        let again = price_zero_volvol(&params(), row[2], 1.1, row[0], row[1]).unwrap();
        assert_eq!(row[3].to_bits(), again.to_bits());
    }
}

#[test]
fn kernel_point_evaluation() {
    let o = lsabr(&["kernel", "--sigma", "0.3", "--x", "-0.2", "--y", "0.1", "--t", "0.5"]);
    assert_eq!(code(&o), 0);
    let r = rows(&stdout(&o));
    let want = lsabr_core::semigroups::kernel_density(&params(), 0.5, 0.3, -0.2, 0.1).unwrap();
    assert_eq!(r[0][4], want);
    assert_eq!(code(&lsabr(&["kernel", "--sigma", "0.9", "--y", "0"])), 2);
}

#[test]
fn fd_solve_zero_volvol_matches_closed_form_and_l() {
    let dir = TempDir::new().unwrap();
    let a = dir.path().join("l0.csv");
    let b = dir.path().join("l.csv");
    let o = lsabr(&["fd-solve", "--generator", "L0", "--t", "0.5", "--out", a.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let o = lsabr(&["fd-solve", "--generator", "L", "--nu", "0", "--t", "0.5", "--out", b.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let (ta, tb) = (fs::read_to_string(&a).unwrap(), fs::read_to_string(&b).unwrap());
    assert_eq!(rows(&ta), rows(&tb));
    assert_ne!(meta(&ta, "params_hash"), meta(&tb, "params_hash"));
    let d: f64 = meta(&ta, "reference_difference").parse().unwrap();
    assert!(d < 5e-3, "{d}");
    assert_eq!(meta(&ta, "generator"), "L0");
    assert_eq!(meta(&ta, "steps"), "50");
}

#[test]
fn fd_solve_self_difference_is_second_order() {
    let run = |dt: &str| {
        let dir = TempDir::new().unwrap();
        let cfg = write_config(dir.path(), &format!("dt = {dt}\nnu = 0.1\n"));
        let o = lsabr(&["fd-solve", "--config", &cfg, "--t", "0.5", "--grid", "31x61"]);
        assert_eq!(code(&o), 0);
        meta(&stdout(&o), "self_difference").parse::<f64>().unwrap()
    };
    let ratio = run("0.02") / run("0.01");
    assert!((3.5..4.5).contains(&ratio), "{ratio}");
}

#[test]
fn verify_garding_defaults_pass_and_are_reproducible() {
    let a = lsabr(&["verify", "--suite", "garding"]);
    assert_eq!(code(&a), 0);
    let v: serde_json::Value = serde_json::from_str(&stdout(&a)).unwrap();
    assert_eq!(v["verdict"], "pass");
    assert_eq!(v["seed"], 42);
    assert!(v["fingerprint"].as_str().unwrap().len() == 64);
    let b = lsabr(&["verify", "--suite", "garding"]);
    assert_eq!(a.stdout, b.stdout);
    let c = lsabr(&["verify", "--suite", "garding", "--seed", "7"]);
    assert_ne!(a.stdout, c.stdout);
}

#[test]
fn verify_identities_defaults_pass() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("id.json");
    let o = lsabr(&["verify", "--suite", "identities", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(out).unwrap()).unwrap();
    assert_eq!(v["verdict"], "pass");
}

#[test]
fn configuration_errors_exit_2() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "alpha = 0.3\n");
    let o = lsabr(&["verify", "--suite", "identities", "--config", &cfg]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("alpha"));
    let cfg = write_config(dir.path(), "kapa = 1\n");
    assert_eq!(code(&lsabr(&["price", "--config", &cfg])), 2);
    assert_eq!(code(&lsabr(&["verify"])), 2);
    assert_eq!(code(&lsabr(&["verify", "--suite", "nope"])), 2);
    assert_eq!(code(&lsabr(&["price", "--grid", "12by41"])), 2);
    assert_eq!(code(&lsabr(&["price", "--sigma", "0.3"])), 2);
}

#[test]
fn flags_override_config_file() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "strike = 2\nt = 0\n");
    let o = lsabr(&["price", "--config", &cfg, "--strike", "0.5", "--sigma", "0.3", "--x", "0"]);
    assert_eq!(rows(&stdout(&o))[0][3], 0.5);
}

#[test]
fn error_study_outputs_and_exit_codes() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "grid = 56x41\ndt = 0.05\n");
    let out = dir.path().join("study.csv");
    let args = ["error-study", "--config", &cfg, "--nu", "0.2", "--out", out.to_str().unwrap()];
    let o = lsabr(&args);
    let first = (fs::read(&out).unwrap(), fs::read(out.with_extension("json")).unwrap());
    assert!(matches!(code(&o), 0 | 3));
    let csv = String::from_utf8(first.0.clone()).unwrap();
    assert_eq!(rows(&csv).len(), 1);
    assert_eq!(meta(&csv, "fitted_slope"), "none");
    let v: serde_json::Value = serde_json::from_slice(&first.1).unwrap();
    assert!(v["fitted_slope"].is_null());
    assert_eq!(v["errors"].as_array().unwrap().len(), 1);
    lsabr(&args);
    assert_eq!(first, (fs::read(&out).unwrap(), fs::read(out.with_extension("json")).unwrap()));

    let o = lsabr(&["error-study", "--config", &cfg, "--nu", "0.001,0.002"]);
    assert_eq!(code(&o), 3);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["status"], "invalid");
}

#[test]
fn help_documents_every_flag() {
    let h = stdout(&lsabr(&["--help"]));
    for flag in ["--config", "--t", "--strike", "--nu", "--generator", "--suite", "--out", "--seed", "--grid"] {
        assert!(h.contains(flag), "{flag}");
    }
    for cmd in ["price", "fd-solve", "verify", "error-study", "kernel"] {
        assert!(h.contains(cmd), "{cmd}");
    }
    assert!(h.contains("Exit codes"));
}
