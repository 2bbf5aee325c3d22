//! End-to-end tests of the command-line interface: exit codes, output
//! artifacts, and bitwise determinism.

use std::fs;
use std::path::PathBuf;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_heatbem"))
}

fn temp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("heatbem-cli-{tag}-{}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn solve_linear_writes_artifacts_and_exits_zero() {
    let out = temp_dir("lin");
    let status = bin()
        .args(["solve-linear", "--out"])
        .arg(&out)
        .status()
        .expect("run solve-linear");
    assert_eq!(status.code(), Some(0));
    for name in ["mu.csv", "eta.csv", "traces.csv", "report.txt"] {
        assert!(out.join(name).exists(), "missing {name}");
    }
    let traces = fs::read_to_string(out.join("traces.csv")).unwrap();
    assert!(traces.starts_with("panel,node,boundary,value"));
    assert!(traces.contains(",outer,") && traces.contains(",inner,"));
}

#[test]
fn solve_nonlinear_is_bitwise_deterministic() {
    let out_a = temp_dir("det-a");
    let out_b = temp_dir("det-b");
    for out in [&out_a, &out_b] {
        let status = bin()
            .args(["solve-nonlinear", "--seed", "42", "--out"])
            .arg(out)
            .status()
            .unwrap();
        assert_eq!(status.code(), Some(0));
    }
    for name in ["mu.csv", "eta.csv", "traces.csv", "newton.csv"] {
        let a = fs::read(out_a.join(name)).unwrap();
        let b = fs::read(out_b.join(name)).unwrap();
        assert_eq!(a, b, "{name} not bitwise identical across runs");
    }
}

#[test]
fn zero_data_reports_zero_solution() {
    let out = temp_dir("zero");
    let cfg = out.join("zero.cfg");
    fs::write(
        &cfg,
        "outer = circle 0 0 2.0\ninner = circle 0 0 0.8\ngrid.nt = 8\ngrid.m_outer = 16\ngrid.m_inner = 16\nf.amp = 0.0\n",
    )
    .unwrap();
    let status = bin()
        .args(["solve-nonlinear", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let report = fs::read_to_string(out.join("report.txt")).unwrap();
    assert!(report.contains("NL-ZERO"), "missing zero-solution note:\n{report}");
}

#[test]
fn config_errors_exit_two_with_line_numbers() {
    let out = temp_dir("badcfg");
    let cfg = out.join("bad.cfg");
    fs::write(&cfg, "outer = circle 0 0 2.0\nthis line is broken\n").unwrap();
    let output = bin()
        .args(["solve-linear", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains(":2"), "expected a line number in: {stderr}");

    // Unknown flags are usage errors too (clap's own exit code).
    let output = bin().args(["solve-linear", "--no-such-flag"]).output().unwrap();
    assert_eq!(output.status.code(), Some(2));

    let output = bin().args(["solve-linear", "--threads", "0"]).output().unwrap();
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn inadmissible_geometry_exits_three() {
    let out = temp_dir("inadm");
    let cfg = out.join("inadm.cfg");
    // Scaling the hole by 4 pushes it outside the outer curve.
    fs::write(
        &cfg,
        "outer = circle 0 0 2.0\ninner = circle 0 0 0.8\nshape = scale 4.0\ngrid.nt = 8\ngrid.m_outer = 16\ngrid.m_inner = 16\n",
    )
    .unwrap();
    let output = bin()
        .args(["solve-nonlinear", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(3));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("solver error"), "stderr: {stderr}");
}

#[test]
fn named_curve_files_resolve() {
    let out = temp_dir("curves");
    fs::write(
        out.join("curves.cfg"),
        "curve outer; kind circle; params 0 0 2.0\ncurve hole; kind fourier; params 0 0 0.8 0 0 0 0 0.04 0\n",
    )
    .unwrap();
    let cfg = out.join("run.cfg");
    fs::write(
        &cfg,
        "curves = curves.cfg\nouter = name:outer\ninner = name:hole\ngrid.nt = 8\ngrid.m_outer = 16\ngrid.m_inner = 16\n",
    )
    .unwrap();
    let status = bin()
        .args(["solve-linear", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
}

#[test]
fn convergence_study_passes_on_small_levels() {
    let out = temp_dir("conv");
    let cfg = out.join("conv.cfg");
    fs::write(
        &cfg,
        "outer = circle 0 0 2.0\ninner = circle 0 0 0.8\nlevels = 8 16 32\n",
    )
    .unwrap();
    let status = bin()
        .args(["convergence", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let csv = fs::read_to_string(out.join("convergence.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
}

#[test]
fn verify_passes_on_shipped_default_config() {
    let out = temp_dir("verify");
    let status = bin().args(["verify", "--out"]).arg(&out).status().unwrap();
    assert_eq!(status.code(), Some(0), "verify must pass on the default configuration");
    let report = fs::read_to_string(out.join("report.txt")).unwrap();
    assert_eq!(report.matches("[PASS]").count(), 10);
    assert_eq!(report.matches("[FAIL]").count(), 0);
    assert!(report.contains("seed = 7"));
}
