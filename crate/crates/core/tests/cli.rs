//! Exit codes and outputs of the command-line front end.

use std::fs;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_fracfreq"))
}

const CASE: &str = "[case]\nid = demo\n[params]\nn = 3\ns = 0.5\nlambda = 0.5\n[boundary]\nkind = mode\nindex = 1\n[grid]\nm = 48\nn = 48\n";

#[test]
fn almgren_subcommand_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("demo.cfg");
    fs::write(&cfg, CASE).unwrap();
    let out = bin()
        .args(["almgren", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path().join("out"))
        .output()
        .unwrap();
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(String::from_utf8_lossy(&out.stdout).contains("k0 = 1"));
    let case = dir.path().join("out").join("demo");
    for name in [
        "spectrum.csv",
        "field.csv",
        "field.afld",
        "frequency.csv",
        "summary.json",
    ] {
        assert!(case.join(name).exists(), "{name}");
    }
    assert!(!case.join("modes.csv").exists());
}

#[test]
fn validation_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    fs::write(
        &cfg,
        CASE.replace("lambda = 0.5", "lambda = 0.5\nalpha = 0.2"),
    )
    .unwrap();
    let out = bin()
        .args(["solve", "--config"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("over-determined"));
    let missing = bin().arg("spectrum").output().unwrap();
    assert_eq!(missing.status.code(), Some(1));
}

#[test]
fn stage_failures_name_the_stage() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    // A mode index beyond the discrete basis only fails once the solve runs.
    fs::write(&cfg, CASE.replace("index = 1", "index = 5000")).unwrap();
    let out = bin()
        .args(["solve", "--config"])
        .arg(&cfg)
        .output()
        .unwrap();
    // An out-of-range mode is a domain error, hence status 1.
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("stage solve"));
}
