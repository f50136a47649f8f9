//! End-to-end checks of the `kappa-ns` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use kappa_ns::runner_io::CSV_COLUMNS;

fn kappa_ns(args: &[&Path]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kappa-ns"))
        .args(args)
        .env("KNSL_THREADS", "1")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, body: &str) -> std::path::PathBuf {
    let path = dir.join("run.cfg");
    fs::write(&path, format!("{body}\noutput.dir = {}\n", dir.join("out").display())).unwrap();
    path
}

const SHORT_RUN: &str = "
experiment.kind = nonlinear
grid.dim = 1
grid.n = 32
solver.kappa = 0.5
solver.dt = 1e-3
solver.t_end = 0.01
output.report_interval = 0.005
";

#[test]
fn validate_accepts_good_and_rejects_bad_kappa() {
    let dir = tempfile::tempdir().unwrap();
    let good = write_config(dir.path(), SHORT_RUN);
    let out = kappa_ns(&[Path::new("validate"), &good]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));

    let bad = write_config(dir.path(), &SHORT_RUN.replace("solver.kappa = 0.5", "solver.kappa = 1.5"));
    let out = kappa_ns(&[Path::new("validate"), &bad]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line"), "error should name a line: {err}");
}

#[test]
fn short_run_writes_report_with_exact_header() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SHORT_RUN);
    let out = kappa_ns(&[Path::new("run"), &cfg]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));

    let csv = fs::read_dir(dir.path().join("out"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .find(|p| p.extension().is_some_and(|e| e == "csv"))
        .expect("a csv report");
    let text = fs::read_to_string(csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), CSV_COLUMNS.join(","));
    assert!(lines.count() >= 2);
}

#[test]
fn cfl_violation_exits_with_numerical_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        &SHORT_RUN.replace("solver.dt = 1e-3", "solver.dt = 0.5").replace("solver.t_end = 0.01", "solver.t_end = 1"),
    );
    let out = kappa_ns(&[Path::new("run"), &cfg]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}
