//! End-to-end runs through the case runner and its artifact files.

use std::fs;

use fracfreq::field::read_afld;
use fracfreq::runner::{parse_config, run_case, run_cases, RunSummary};
use fracfreq::Error;

const CASE: &str = "\
# first eigenprofile at lambda = 1/2
[case]
id = hardy

[params]
n = 3
s = 0.5
lambda = 0.5

[boundary]
kind = mode
index = 1

[grid]
m = 64
n = 64

[run]
pipeline = fourier, inequalities
";

#[test]
fn case_file_produces_every_artifact() {
    let config = parse_config(CASE).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let summary = run_case(&config, dir.path()).unwrap();
    let a = summary.almgren.as_ref().unwrap();
    assert!((a.gamma_hat + 0.5).abs() < 1e-3);
    assert_eq!(a.classification.k0, 1);
    for name in [
        "spectrum.csv",
        "field.csv",
        "frequency.csv",
        "modes.csv",
        "inequalities.csv",
    ] {
        let text = fs::read_to_string(dir.path().join(name)).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            format!("# config_hash={}", config.hash())
        );
        assert!(
            lines.next().unwrap().contains(','),
            "{name} has a header row"
        );
    }
    let table = read_afld(fs::File::open(dir.path().join("field.afld")).unwrap()).unwrap();
    assert_eq!((table.len(), table[0].len()), (65, 64));
    let json: RunSummary =
        serde_json::from_str(&fs::read_to_string(dir.path().join("summary.json")).unwrap())
            .unwrap();
    assert_eq!(json, summary);
    let leftovers: Vec<_> = fs::read_dir(dir.path())
        .unwrap()
        .filter_map(|e| e.ok())
        .filter(|e| e.file_name().to_string_lossy().ends_with(".tmp"))
        .collect();
    assert!(leftovers.is_empty());
}

#[test]
fn parallel_runs_match_serial_runs() {
    let base = parse_config(CASE).unwrap();
    let configs: Vec<_> = ["a", "b", "c"]
        .iter()
        .map(|id| {
            let mut c = base.clone();
            c.id = id.to_string();
            c
        })
        .collect();
    let dir = tempfile::tempdir().unwrap();
    let par = run_cases(&configs, Some(dir.path()), 3);
    let ser = run_cases(&configs, Some(&dir.path().join("serial")), 1);
    for (p, s) in par.into_iter().zip(ser) {
        let (mut p, mut s) = (p.unwrap(), s.unwrap());
        p.wall_time_s = 0.0;
        s.wall_time_s = 0.0;
        assert_eq!(p, s);
    }
    for id in ["a", "b", "c"] {
        let x = fs::read(dir.path().join(id).join("field.afld")).unwrap();
        let y = fs::read(dir.path().join("serial").join(id).join("field.afld")).unwrap();
        assert_eq!(x, y);
    }
}

#[test]
fn invalid_files_report_validation_errors() {
    let err = parse_config(&CASE.replace("lambda = 0.5", "lambda = 0.9")).unwrap_err();
    assert!(matches!(err, Error::Config(_)));
    assert_eq!(err.exit_code(), 1);
}
