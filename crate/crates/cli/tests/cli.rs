//! The `mdkinetic` binary end to end.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn mdkinetic(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mdkinetic"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("run.toml");
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_owned()
}

#[test]
fn validate_config_accepts_defaults() {
    let o = mdkinetic(&["validate-config"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).starts_with("configuration ok"));
}

#[test]
fn unknown_key_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "beta_N = 0.2\nbeta_X = 1.0\n");
    let o = mdkinetic(&["validate-config", "--config", &cfg]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("beta_X"), "{}", stderr(&o));
}

#[test]
fn epsilon_outside_unit_interval_is_rejected() {
    let o = mdkinetic(&["validate-config", "--epsilon", "0.1,2"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("(0,1]"), "{}", stderr(&o));
}

#[test]
fn exploding_variance_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "sigma2_D = 0.5\n");
    let o = mdkinetic(&["validate-config", "--config", &cfg]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("σ_D² ≥ 2β_D"), "{}", stderr(&o));
}

#[test]
fn moments_writes_its_tables() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "horizon = 1.0\n");
    let out = dir.path().join("out");
    let o = mdkinetic(&["moments", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(out.join("moments/moments.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,m_N,m_D,m_M,m_C,V_N,V_D,V_M,V_C"));
    let last: Vec<f64> = lines
        .last()
        .unwrap()
        .split(',')
        .map(|v| v.parse().unwrap())
        .collect();
    assert_eq!(last[0], 1.0);
    assert!((last[1] + last[2] - 10.0).abs() < 1e-10);
    assert!(out.join("moments/equilibrium.csv").exists());
}

#[test]
fn zero_horizon_reports_only_the_initial_state() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "horizon = 0.0\n");
    let out = dir.path().join("out");
    let o = mdkinetic(&["moments", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(out.join("moments/moments.csv")).unwrap();
    assert_eq!(text.lines().count(), 2, "{text}");
    assert!(text.lines().nth(1).unwrap().starts_with("0,9,1,0.1,0.5,"));
}

#[test]
fn particle_runs_are_byte_identical_for_a_seed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "n_particles = 2000\nworkers = 2\nhorizon = 0.5\nreport_interval = 0.25\nepsilons = [0.1]\n",
    );
    let run = |name: &str, seed: &str| {
        let out = dir.path().join(name);
        let o = mdkinetic(&["consistency", "--config", &cfg, "--seed", seed, "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", stderr(&o));
        fs::read(out.join("consistency/consistency_eps_0.1.csv")).unwrap()
    };
    let a = run("a", "7");
    assert_eq!(a, run("b", "7"));
    assert_ne!(a, run("c", "8"));
}
