//! End-to-end checks of the binary: config validation, artifact shapes,
//! exit codes, and run-to-run reproducibility of the manifest.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_mfelab")
}

fn scratch(name: &str) -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join(name);
    if dir.exists() {
        std::fs::remove_dir_all(&dir).unwrap();
    }
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn run_cli(args: &[&str]) -> Output {
    Command::new(bin()).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("run.toml");
    std::fs::write(&path, body).unwrap();
    path
}

fn read_json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn solve_from_zero_is_already_converged() {
    let dir = scratch("solve_zero");
    let config = write_config(
        &dir,
        r#"
command = "solve"

[problem]
variant = "sawada-suzuki"
lambda = 20.0
resolution = 32
side = 6.283185307179586
measure = "dirac-one"

[initial]
preset = "zero"
"#,
    );
    let out_dir = dir.join("out");
    let out = run_cli(&["--config", config.to_str().unwrap(), "--output", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));

    let manifest = read_json(&out_dir.join("manifest.json"));
    assert_eq!(manifest["command"], "solve");
    assert_eq!(manifest["exit_code"], 0);
    let files = manifest["files"].as_object().unwrap();
    for name in ["solution.mfe1", "solve.json", "trace.csv"] {
        assert!(files.contains_key(name), "manifest missing {name}");
    }

    let summary = read_json(&out_dir.join("solve.json"));
    assert_eq!(summary["converged"], true);
    assert_eq!(summary["iterations"], 0);
    assert!(summary["residual_norm"].as_f64().unwrap() <= 1e-12);
}

#[test]
fn tm_sweep_brackets_the_point_mass_threshold() {
    let dir = scratch("tm_sweep");
    let config = write_config(
        &dir,
        r#"
command = "tm-sweep"

[problem]
variant = "neri"
lambda = 25.0
resolution = 128
side = 6.283185307179586
measure = "dirac-one"

[tm]
mus = [6.0, 12.0, 24.0]
lambdas = [20.0, 24.0, 28.0, 32.0]
bracket = [20.0, 32.0]
"#,
    );
    let out_dir = dir.join("out");
    let out = run_cli(&[
        "--config",
        config.to_str().unwrap(),
        "--output",
        out_dir.to_str().unwrap(),
        "--threads",
        "2",
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));

    let threshold = read_json(&out_dir.join("threshold.json"));
    let estimate = threshold["estimate"].as_f64().unwrap();
    let sharp = 8.0 * PI;
    assert!((estimate - sharp).abs() <= 0.10 * sharp, "estimate {estimate} vs {sharp}");

    let csv = std::fs::read_to_string(out_dir.join("threshold.csv")).unwrap();
    assert!(csv.starts_with("variant,direction,low,high,estimate\r\n"));
    assert!(csv.contains(&estimate.to_string()));

    let sweep = std::fs::read_to_string(out_dir.join("sweep.csv")).unwrap();
    assert!(sweep.starts_with("lambda,mu,value,slope,verdict\r\n"));
    // 4 lambdas x 3 family members plus the header.
    assert_eq!(sweep.trim_end().lines().count(), 13);
}

#[test]
fn negative_lambda_is_rejected_naming_the_field() {
    let dir = scratch("bad_lambda");
    let config = write_config(
        &dir,
        r#"
command = "solve"

[problem]
variant = "sawada-suzuki"
lambda = -5.0
resolution = 32
side = 6.283185307179586
measure = "dirac-one"
"#,
    );
    let out = run_cli(&["--config", config.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("problem.lambda"), "stderr: {stderr}");
}

#[test]
fn validate_only_lists_every_violation() {
    let dir = scratch("validate");
    let good = write_config(
        &dir,
        r#"
command = "quantize"

[problem]
variant = "neri"
lambda = 10.0
resolution = 32
side = 6.283185307179586
measure = "two-mass:0.5"
"#,
    );
    let out = run_cli(&["--config", good.to_str().unwrap(), "--validate-only"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "configuration ok");

    let bad = dir.join("bad.toml");
    std::fs::write(
        &bad,
        r#"
command = "solve"

[problem]
variant = "sawada-suzuki"
lambda = -3.0
resolution = 129
side = 6.283185307179586
measure = "two-mass:1.3"
"#,
    )
    .unwrap();
    let out = run_cli(&["--config", bad.to_str().unwrap(), "--validate-only"]);
    assert_eq!(out.status.code(), Some(1));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("problem.lambda"), "stdout: {stdout}");
    assert!(stdout.contains("resolution must be even"), "stdout: {stdout}");
    assert!(stdout.contains("t ∉ [0,1]"), "stdout: {stdout}");
    assert_eq!(stdout.trim_end().lines().count(), 3, "stdout: {stdout}");
}

#[test]
fn criterion_11_identical_config_and_seed_reproduce_checksums() {
    let dir = scratch("repro");
    let config = write_config(
        &dir,
        r#"
command = "minimize"
seed = 42

[problem]
variant = "neri"
lambda = 18.0
resolution = 32
side = 6.283185307179586
measure = "two-mass:0.4"

[initial]
preset = "random:0.6"
"#,
    );
    let out_a = dir.join("a");
    let out_b = dir.join("b");
    for out_dir in [&out_a, &out_b] {
        let out = run_cli(&[
            "--config",
            config.to_str().unwrap(),
            "--output",
            out_dir.to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    }
    let manifest_a = std::fs::read(out_a.join("manifest.json")).unwrap();
    let manifest_b = std::fs::read(out_b.join("manifest.json")).unwrap();
    let identical = manifest_a == manifest_b;
    let solution_a = std::fs::read(out_a.join("solution.mfe1")).unwrap();
    let solution_b = std::fs::read(out_b.join("solution.mfe1")).unwrap();
    println!(
        "criterion 11 reproducibility: {} (manifests {} bytes, solutions {} bytes)",
        if identical && solution_a == solution_b { "PASS" } else { "FAIL" },
        manifest_a.len(),
        solution_a.len(),
    );
    assert!(identical, "manifest checksums differ between identical runs");
    assert_eq!(solution_a, solution_b, "solution bytes differ between identical runs");
}

#[test]
fn diverging_descent_exits_two_with_manifest() {
    let dir = scratch("diverge");
    let config = write_config(
        &dir,
        &format!(
            r#"
command = "minimize"

[problem]
variant = "sawada-suzuki"
lambda = {lambda}
resolution = 64
side = 6.283185307179586
measure = "dirac-one"

[solver]
max_iter = 3000
divergence_floor = -90.0

[initial]
preset = "bubble:10"
"#,
            lambda = 8.0 * PI + 1.0
        ),
    );
    let out_dir = dir.join("out");
    let out = run_cli(&["--config", config.to_str().unwrap(), "--output", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2), "stderr: {}", String::from_utf8_lossy(&out.stderr));

    let outcome = read_json(&out_dir.join("outcome.json"));
    assert_eq!(outcome["outcome"], "diverged");
    let manifest = read_json(&out_dir.join("manifest.json"));
    assert_eq!(manifest["exit_code"], 2);
    assert!(manifest["files"].as_object().unwrap().contains_key("outcome.json"));
}

#[test]
fn blowup_scan_writes_report_and_mass_table() {
    let dir = scratch("scan");
    let config = write_config(
        &dir,
        r#"
command = "blowup-scan"

[problem]
variant = "sawada-suzuki"
lambda = 25.132741228718345
resolution = 128
side = 6.283185307179586
measure = "dirac-one"

[initial]
preset = "bubble:20"

[diagnostics]
peak_threshold = 1.0
"#,
    );
    let out_dir = dir.join("out");
    let out = run_cli(&["--config", config.to_str().unwrap(), "--output", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));

    let report = read_json(&out_dir.join("report.json"));
    assert_eq!(report["schema_version"], 1);
    let peaks = report["peaks_plus"].as_array().unwrap();
    assert_eq!(peaks.len(), 1, "the bubble should register as one positive peak");
    let eight_pi = 8.0 * std::f64::consts::PI;
    let n_plus = report["n_plus"][0].as_f64().unwrap();
    assert!(
        (n_plus - eight_pi).abs() <= 0.1 * eight_pi,
        "estimated bubble mass {n_plus} should be within 10% of 8π"
    );
    let masses = std::fs::read_to_string(out_dir.join("masses.csv")).unwrap();
    assert!(masses.starts_with("peak,side,x1,x2,alpha,mass,n_estimate,quantization_residual\r\n"));
    assert!(masses.lines().count() > 1, "mass table should have data rows");
    assert!(out_dir.join("s_plus.mfe1").is_file());
    assert!(out_dir.join("s_minus.mfe1").is_file());
}

#[test]
fn quantize_covers_single_and_pair_supports() {
    let dir = scratch("quantize");
    let single = write_config(
        &dir,
        r#"
command = "quantize"

[problem]
variant = "sawada-suzuki"
lambda = 10.0
resolution = 32
side = 6.283185307179586
measure = "dirac-one"
"#,
    );
    let out_dir = dir.join("single");
    let out = run_cli(&["--config", single.to_str().unwrap(), "--output", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let solution = read_json(&out_dir.join("quantize.json"));
    assert_eq!(solution["kind"], "single");
    assert!((solution["mass"].as_f64().unwrap() - 8.0 * PI).abs() <= 1e-12);

    let pair = dir.join("pair.toml");
    std::fs::write(
        &pair,
        r#"
command = "quantize"

[problem]
variant = "neri"
lambda = 10.0
resolution = 32
side = 6.283185307179586
measure = "two-mass:0.5"
"#,
    )
    .unwrap();
    let out_dir = dir.join("pair");
    let out = run_cli(&["--config", pair.to_str().unwrap(), "--output", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let solution = read_json(&out_dir.join("quantize.json"));
    assert_eq!(solution["kind"], "pair");
    assert!(!solution["samples"].as_array().unwrap().is_empty());
}

#[test]
fn check_assumptions_holds_on_a_random_field() {
    let dir = scratch("assumptions");
    let config = write_config(
        &dir,
        r#"
command = "check-assumptions"
seed = 7

[problem]
variant = "neri"
lambda = 12.0
resolution = 32
side = 6.283185307179586
measure = "uniform-quadrature:5"

[initial]
preset = "random:1.5"
"#,
    );
    let out_dir = dir.join("out");
    let out = run_cli(&["--config", config.to_str().unwrap(), "--output", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let report = read_json(&out_dir.join("check-assumptions.json"));
    assert_eq!(report["all_hold"], true);
    let text = std::fs::read_to_string(out_dir.join("assumptions.txt")).unwrap();
    assert!(text.contains("jensen_ok = true"));
    assert!(text.contains("monotone = true"));
}
