//! End-to-end checks of the `mapless` binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BUNDLE: [&str; 5] = ["metrics.txt", "steps.csv", "lateral_error.csv", "velocity.csv", "path.csv"];

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(format!("{name}.toml"))
}

fn mapless(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mapless")).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn run(scenario: &Path, out: &Path) -> Output {
    mapless(&["run", "--scenario", scenario.to_str().unwrap(), "--out", out.to_str().unwrap(), "--quiet"])
}

#[test]
fn run_writes_a_reproducible_bundle() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert_eq!(code(&run(&scenario("straight"), &a)), 0);
    assert_eq!(code(&run(&scenario("straight"), &b)), 0);
    for f in BUNDLE {
        let x = fs::read(a.join(f)).unwrap_or_else(|_| panic!("{f} missing"));
        let y = fs::read(b.join(f)).unwrap();
        assert!(!x.is_empty(), "{f} empty");
        assert!(x == y, "{f} differs between identical runs");
    }
    assert!(!a.join("metrics.partial").exists());
}

#[test]
fn unknown_key_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.toml");
    let text = fs::read_to_string(scenario("straight")).unwrap() + "\n[controller]\ngama1 = 2.0\n";
    fs::write(&cfg, text).unwrap();
    let out = run(&cfg, &tmp.path().join("out"));
    assert_eq!(code(&out), 1);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("gama1"), "{err}");
    assert!(err.contains("bad.toml"), "{err}");
}

#[test]
fn runaway_gains_fail_the_run_but_keep_the_metrics() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    assert_eq!(code(&run(&scenario("unstable"), &out)), 2);
    let metrics = fs::read_to_string(out.join("metrics.txt")).unwrap();
    assert!(metrics.contains("failed = true"), "{metrics}");
}

#[test]
fn sweep_records_rejected_values() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("sweep");
    let o = mapless(&[
        "sweep",
        "--scenario",
        scenario("straight").to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--sweep",
        "controller.gamma1=0,0.5,1.0",
        "--quiet",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let summary = fs::read_to_string(out.join("summary.csv")).unwrap();
    let rows: Vec<&str> = summary.lines().skip(1).collect();
    assert_eq!(rows.len(), 3);
    assert!(rows[0].starts_with("0,invalid,"), "{summary}");
    assert!(rows[1].starts_with("0.5,ok,") && rows[2].starts_with("1.0,ok,"), "{summary}");
    assert!(!out.join("controller.gamma1=0").exists());
    for v in ["0.5", "1.0"] {
        for f in BUNDLE {
            assert!(out.join(format!("controller.gamma1={v}")).join(f).exists());
        }
    }
}

#[test]
fn acceptance_reports_each_selected_criterion() {
    let o = mapless(&["acceptance", "--only", "AC5,AC7"]);
    let text = String::from_utf8_lossy(&o.stdout);
    assert_eq!(code(&o), 0, "{text}");
    assert!(text.lines().any(|l| l.starts_with("AC5") && l.contains("PASS")), "{text}");
    assert!(text.lines().any(|l| l.contains("AC7")), "{text}");
    assert!(text.contains("2 of 2 criteria passed"), "{text}");
}

#[test]
fn impossible_tolerance_fails_acceptance() {
    let tmp = tempfile::tempdir().unwrap();
    let tol = tmp.path().join("tight.toml");
    fs::write(&tol, "quintic_residual = 0.0\n").unwrap();
    let o = mapless(&["acceptance", "--tolerances", tol.to_str().unwrap(), "--only", "AC5"]);
    let text = String::from_utf8_lossy(&o.stdout);
    assert_ne!(code(&o), 0, "{text}");
    assert!(text.lines().any(|l| l.starts_with("AC5") && l.contains("FAIL")), "{text}");
}
