use std::path::Path;
use std::process::{Command, Output};

fn latwalk(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_latwalk")).args(args).current_dir(cwd).output().expect("binary runs")
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("config.json");
    std::fs::write(&path, body).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn minimal_heat_kernel_config_passes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"schema": "latwalk-experiment/1", "experiment": "gaussian_bound_check", "n": 1,
            "ladders": {"k": [16, 32, 64, 128, 256]}, "out_dir": "out"}"#,
    );
    let out = latwalk(&["run", &cfg], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("out/report.json")).unwrap()).unwrap();
    let slope = report["results"]["on_diagonal"]["exponent"].as_f64().unwrap();
    assert!((slope + 0.5).abs() < 0.05, "{slope}");
    assert_eq!(report["experiment"], "heat-kernel");
    assert!(report["claim"].as_str().unwrap().contains("k^{-n/2}"));
    assert!(dir.path().join("out/heat_kernel.csv").exists());
    assert!(dir.path().join("out/heat_kernel.svg").exists());
}

#[test]
fn empty_ladder_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"schema": "latwalk-experiment/1", "experiment": "heat-kernel", "n": 1, "ladders": {"k": []}}"#);
    let out = latwalk(&["run", &cfg], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("ladders.k"));
}

#[test]
fn impossible_gate_fails_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"schema": "latwalk-experiment/1", "experiment": "heat-kernel", "n": 1,
            "gate": {"within": {"target": -5, "tol": 0.1}}}"#,
    );
    let out = latwalk(&["run", &cfg, "--out-dir", "gated"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains("FAIL on-diagonal exponent"));
    assert!(dir.path().join("gated/report.json").exists());
}

#[test]
fn unknown_experiment_names_the_nearest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"schema": "latwalk-experiment/1", "experiment": "bochner-reisz", "n": 1}"#);
    let out = latwalk(&["run", &cfg], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("\"bochner-riesz\""));
}

#[test]
fn invalid_arguments_exit_with_usage_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"schema": "latwalk-experiment/1", "experiment": "restriction-st", "n": 2,
        "multiplier": {"kind": "bump", "lo": 0.1, "hi": 0.2}}"#);
    assert_eq!(latwalk(&["run", &cfg], dir.path()).status.code(), Some(2));
    assert_eq!(latwalk(&["frobnicate"], dir.path()).status.code(), Some(2));
    assert_eq!(latwalk(&["run", "missing.json"], dir.path()).status.code(), Some(2));
}

#[test]
fn list_shows_every_experiment() {
    let out = latwalk(&["list"], Path::new("."));
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 12);
    for name in ["heat-kernel", "pve-certify", "partition-audit", "dyadic-reconstruct", "commutator-suite", "wave-growth",
        "multiplier-uniform", "bochner-riesz", "surface-curvature", "mu-decay", "spectral-measure-decay", "restriction-st"]
    {
        assert!(text.lines().any(|l| l.starts_with(name)), "{name}");
    }
}

#[test]
fn export_kernel_writes_walk_probabilities() {
    let dir = tempfile::tempdir().unwrap();
    let out = latwalk(&["export-kernel", "--n", "1", "--M", "16", "--k", "2", "--out", "k.csv"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let mut rdr = csv::Reader::from_path(dir.path().join("k.csv")).unwrap();
    assert_eq!(rdr.headers().unwrap(), vec!["d_1", "re", "im"]);
    let mut total = 0.0;
    for rec in rdr.records() {
        let rec = rec.unwrap();
        let (d, re): (i64, f64) = (rec[0].parse().unwrap(), rec[1].parse().unwrap());
        let expect = match d {
            0 => 0.5,
            2 | -2 => 0.25,
            _ => 0.0,
        };
        assert!((re - expect).abs() < 1e-15, "{d}: {re}");
        total += re;
    }
    assert!((total - 1.0).abs() < 1e-14);
}
