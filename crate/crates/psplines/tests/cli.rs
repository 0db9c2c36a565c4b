//! Black-box tests of the `psplines` binary: file formats, exit codes, and
//! determinism of the simulation outputs.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_psplines"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary should run")
}

fn stdout_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

/// Strip `#` metadata lines; the numeric payload must stand on its own.
fn payload(text: &str) -> Vec<String> {
    text.lines()
        .filter(|l| !l.trim_start().starts_with('#') && !l.trim().is_empty())
        .map(|l| l.to_string())
        .collect()
}

#[test]
fn knots_uniform_prints_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("knots.csv");
    let out = run(&[
        "knots",
        "--placement",
        "uniform",
        "--a",
        "0",
        "--b",
        "4",
        "--k",
        "2",
        "--degree",
        "3",
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stdout_of(&out));
    let diag: serde_json::Value = serde_json::from_str(&stdout_of(&out)).unwrap();
    assert_eq!(diag["num_basis"], 6);
    let text = fs::read_to_string(&out_path).unwrap();
    let rows = payload(&text);
    assert_eq!(rows.len(), 10);
    let first: f64 = rows[0].parse().unwrap();
    let last: f64 = rows[9].parse().unwrap();
    assert!(first < 0.0 && last > 4.0);
}

fn write_worked_example_knots(path: &Path) {
    let mut text = String::new();
    for v in [0.0, 0.0, 0.0, 0.0, 1.0, 3.0, 4.0, 4.0, 4.0, 4.0] {
        text.push_str(&format!("{v}\n"));
    }
    fs::write(path, text).unwrap();
}

#[test]
fn penalty_emits_golden_difference_matrix() {
    let dir = tempfile::tempdir().unwrap();
    let knots_path = dir.path().join("knots.csv");
    write_worked_example_knots(&knots_path);
    let out = run(&[
        "penalty",
        "--knots-file",
        knots_path.to_str().unwrap(),
        "--degree",
        "3",
        "--penalty-order",
        "3",
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    for name in ["D.csv", "Sbar.csv", "S.csv", "K.csv"] {
        assert!(dir.path().join(name).exists(), "{name} missing");
    }
    let d_text = fs::read_to_string(dir.path().join("D.csv")).unwrap();
    let first_row: Vec<f64> = payload(&d_text)[0]
        .split(',')
        .map(|v| v.parse().unwrap())
        .collect();
    let want = [-6.0, 26.0 / 3.0, -19.0 / 6.0, 0.5, 0.0, 0.0];
    assert_eq!(first_row.len(), want.len());
    for (got, want) in first_row.iter().zip(&want) {
        assert!((got - want).abs() < 1e-12, "{got} vs {want}");
    }
}

#[test]
fn penalty_rejects_order_at_spline_order() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "penalty",
        "--uniform",
        "0,1,5",
        "--degree",
        "3",
        "--penalty-order",
        "4",
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("order"), "stderr: {err}");
}

#[test]
fn penalty_check_reports_max_deviation() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "penalty",
        "--uniform",
        "0,1,6",
        "--degree",
        "3",
        "--penalty-order",
        "2",
        "--out-dir",
        dir.path().to_str().unwrap(),
        "--check",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout_of(&out);
    assert!(text.contains("max dev") && text.contains("< 1e-8"), "{text}");
}

fn write_sine_data(path: &Path, n: usize) {
    let mut text = String::from("x,y\n");
    for i in 0..n {
        // Deterministic pseudo-noise keeps the fixture self-contained.
        let x = i as f64 / (n - 1) as f64;
        let noise = ((i as f64 * 12.9898).sin() * 43758.5453).fract() - 0.5;
        let y = (2.0 * std::f64::consts::PI * x).sin() + 0.1 * noise;
        text.push_str(&format!("{x},{y}\n"));
    }
    fs::write(path, text).unwrap();
}

#[test]
fn fit_writes_json_and_grid() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data.csv");
    write_sine_data(&data, 200);
    let json_path = dir.path().join("fit.json");
    let grid_path = dir.path().join("grid.csv");
    let out = run(&[
        "fit",
        "--input",
        data.to_str().unwrap(),
        "--k",
        "15",
        "--degree",
        "3",
        "--penalty-order",
        "2",
        "--flavor",
        "general",
        "--knots",
        "quantile",
        "--out-json",
        json_path.to_str().unwrap(),
        "--out-grid",
        grid_path.to_str().unwrap(),
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let result: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&json_path).unwrap()).unwrap();
    assert!(result["lambda"].as_f64().unwrap() > 0.0);
    assert!(result["edf"].as_f64().unwrap() > 2.0);
    assert_eq!(result["beta"].as_array().unwrap().len(), 15 + 4);
    assert_eq!(result["knots"].as_array().unwrap().len(), 15 + 8);
    let grid = fs::read_to_string(&grid_path).unwrap();
    let rows = payload(&grid);
    assert_eq!(rows.len(), 513); // header + 512 grid points
    assert_eq!(rows[0], "grid_x,fitted");
}

#[test]
fn fit_reads_stdin_and_writes_stdout() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data.csv");
    write_sine_data(&data, 120);
    let out = bin()
        .args(["fit", "--input", "-", "--k", "8", "--lambda", "1.0"])
        .stdin(fs::File::open(&data).unwrap())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let result: serde_json::Value = serde_json::from_str(&stdout_of(&out)).unwrap();
    assert_eq!(result["lambda"].as_f64().unwrap(), 1.0);
}

#[test]
fn fit_naive_combination_needs_force() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data.csv");
    write_sine_data(&data, 120);
    let base = [
        "fit",
        "--input",
        data.to_str().unwrap(),
        "--k",
        "8",
        "--flavor",
        "standard",
        "--knots",
        "quantile",
    ];
    let refused = run(&base);
    assert_eq!(refused.status.code(), Some(2));
    let mut forced: Vec<&str> = base.to_vec();
    forced.push("--force-naive");
    let accepted = run(&forced);
    assert_eq!(accepted.status.code(), Some(0));
}

#[test]
fn simulate_is_deterministic_across_parallelism() {
    let dir = tempfile::tempdir().unwrap();
    let serial_dir = dir.path().join("serial");
    let parallel_dir = dir.path().join("parallel");
    for (out_dir, serial) in [(&serial_dir, true), (&parallel_dir, false)] {
        let mut args = vec![
            "simulate",
            "--study",
            "random",
            "--N",
            "4",
            "--n",
            "150",
            "--degree",
            "3",
            "--gamma",
            "0.1",
            "--seed",
            "42",
            "--k",
            "25",
            "--m",
            "2",
            "--out",
            out_dir.to_str().unwrap(),
        ];
        if serial {
            args.push("--serial");
        }
        let out = run(&args);
        assert_eq!(
            out.status.code(),
            Some(0),
            "stderr: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
    for name in ["replicates.csv", "summary.json"] {
        let a = fs::read(serial_dir.join(name)).unwrap();
        let b = fs::read(parallel_dir.join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between serial and parallel runs");
    }
}

#[test]
fn verify_quick_passes_with_json_report() {
    let out = run(&["verify", "--quick", "--json"]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "stdout: {}",
        stdout_of(&out)
    );
    let report: serde_json::Value = serde_json::from_str(&stdout_of(&out)).unwrap();
    let items = report.as_array().unwrap();
    assert!(items.len() >= 8);
    for item in items {
        assert_eq!(item["passed"], true, "{item}");
    }
}

#[test]
fn unknown_flag_is_usage_error() {
    let out = run(&["fit", "--definitely-not-a-flag"]);
    assert_eq!(out.status.code(), Some(1));
}
