//! End-to-end tests that drive the compiled `sirfit` binary the way a user
//! would: real files in, exit codes and artifacts out.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::tempdir;

const DEMO_INPUT: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../../data/demo_outbreak.csv");
const DEMO_HOLDOUT: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../../data/demo_holdout.csv");

fn sirfit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sirfit"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stderr_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn stdout_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn exit_code(out: &Output) -> i32 {
    out.status.code().expect("no signal")
}

/// A fast fit configuration: small chains are plenty for plumbing tests.
fn quick_fit(out_dir: &Path, extra: &[&str]) -> Output {
    let dir = out_dir.to_str().unwrap();
    let mut args = vec![
        "fit",
        "--input",
        DEMO_INPUT,
        "--seed",
        "42",
        "--chains",
        "2",
        "--burn-in",
        "400",
        "--samples",
        "1200",
        "--ensemble",
        "300",
        "--out-dir",
        dir,
    ];
    args.extend_from_slice(extra);
    sirfit(&args)
}

fn read_json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn help_exits_zero_and_unknown_flag_exits_one() {
    let help = sirfit(&["--help"]);
    assert_eq!(exit_code(&help), 0);
    assert!(stdout_of(&help).contains("fit"));

    let unknown = sirfit(&["fit", "--frobnicate"]);
    assert_eq!(exit_code(&unknown), 1);
}

#[test]
fn missing_input_file_exits_one_and_names_the_path() {
    let dir = tempdir().unwrap();
    let out = sirfit(&[
        "fit",
        "--input",
        "/no/such/file.csv",
        "--seed",
        "1",
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 1);
    assert!(stderr_of(&out).contains("/no/such/file.csv"));
}

#[test]
fn fit_without_seed_is_a_usage_error() {
    let dir = tempdir().unwrap();
    let out = sirfit(&[
        "fit",
        "--input",
        DEMO_INPUT,
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 1);
    assert!(stderr_of(&out).contains("seed"));
}

#[test]
fn fit_reruns_are_byte_identical() {
    let dir = tempdir().unwrap();
    let out_dir = dir.path().join("run");
    assert_eq!(
        exit_code(&quick_fit(&out_dir, &["--validation", DEMO_HOLDOUT])),
        0
    );
    let first: Vec<(PathBuf, Vec<u8>)> = ["posterior.csv", "fit_report.json", "envelope.csv"]
        .iter()
        .map(|name| {
            let path = out_dir.join(name);
            let bytes = fs::read(&path).unwrap();
            (path, bytes)
        })
        .collect();

    assert_eq!(
        exit_code(&quick_fit(&out_dir, &["--validation", DEMO_HOLDOUT])),
        0
    );
    for (path, bytes) in &first {
        assert_eq!(
            &fs::read(path).unwrap(),
            bytes,
            "{} changed between identical runs",
            path.display()
        );
    }

    // The output location must not leak into the artifacts either: the same
    // fit written elsewhere produces the same bytes.
    let elsewhere = dir.path().join("elsewhere");
    assert_eq!(
        exit_code(&quick_fit(&elsewhere, &["--validation", DEMO_HOLDOUT])),
        0
    );
    for (path, bytes) in &first {
        let name = path.file_name().unwrap();
        assert_eq!(
            &fs::read(elsewhere.join(name)).unwrap(),
            bytes,
            "{} depends on the output directory",
            name.to_string_lossy()
        );
    }
}

#[test]
fn fit_then_validate_reproduces_the_stored_r2_exactly() {
    let dir = tempdir().unwrap();
    let fit_dir = dir.path().join("fit");
    assert_eq!(
        exit_code(&quick_fit(&fit_dir, &["--validation", DEMO_HOLDOUT])),
        0
    );
    let report = read_json(&fit_dir.join("fit_report.json"));

    let val_dir = dir.path().join("val");
    let out = sirfit(&[
        "validate",
        "--posterior",
        fit_dir.join("posterior.csv").to_str().unwrap(),
        "--input",
        DEMO_INPUT,
        "--validation",
        DEMO_HOLDOUT,
        "--out-dir",
        val_dir.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 0);
    let validation = read_json(&val_dir.join("validation_report.json"));

    assert_eq!(validation["r2_in_sample"], report["r2_in_sample"]);
    assert_eq!(validation["r2_out_sample"], report["r2_out_sample"]);
    assert_eq!(validation["map"], report["map"]);
}

#[test]
fn validate_with_equal_series_reports_equal_r2() {
    let dir = tempdir().unwrap();
    let fit_dir = dir.path().join("fit");
    assert_eq!(exit_code(&quick_fit(&fit_dir, &[])), 0);

    let val_dir = dir.path().join("val");
    let out = sirfit(&[
        "validate",
        "--posterior",
        fit_dir.join("posterior.csv").to_str().unwrap(),
        "--input",
        DEMO_INPUT,
        "--validation",
        DEMO_INPUT,
        "--out-dir",
        val_dir.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 0);
    let validation = read_json(&val_dir.join("validation_report.json"));
    assert_eq!(validation["r2_in_sample"], validation["r2_out_sample"]);
}

#[test]
fn report_renders_the_stored_fit_and_controls_svg_output() {
    let dir = tempdir().unwrap();
    let fit_dir = dir.path().join("fit");
    assert_eq!(exit_code(&quick_fit(&fit_dir, &[])), 0);

    let no_svg = sirfit(&["report", "--run-dir", fit_dir.to_str().unwrap()]);
    assert_eq!(exit_code(&no_svg), 0);
    let summary = fs::read_to_string(fit_dir.join("summary.txt")).unwrap();
    assert_eq!(stdout_of(&no_svg), summary);
    assert!(summary.contains("demo_outbreak"));
    assert!(summary.contains("R0"));
    let svg_count = || {
        fs::read_dir(&fit_dir)
            .unwrap()
            .filter(|e| {
                e.as_ref()
                    .unwrap()
                    .path()
                    .extension()
                    .is_some_and(|x| x == "svg")
            })
            .count()
    };
    assert_eq!(svg_count(), 0);

    let with_svg = sirfit(&["report", "--run-dir", fit_dir.to_str().unwrap(), "--emit-svg"]);
    assert_eq!(exit_code(&with_svg), 0);
    assert_eq!(svg_count(), 3);
}

#[test]
fn report_on_an_empty_directory_lists_the_missing_artifacts() {
    let dir = tempdir().unwrap();
    let out = sirfit(&["report", "--run-dir", dir.path().to_str().unwrap()]);
    assert_eq!(exit_code(&out), 1);
    let stderr = stderr_of(&out);
    for name in ["posterior.csv", "fit_report.json", "envelope.csv"] {
        assert!(stderr.contains(name), "{stderr} missing {name}");
    }
}

#[test]
fn single_trajectory_simulation_reaches_the_final_size_fixed_point() {
    let dir = tempdir().unwrap();
    let out = sirfit(&[
        "simulate",
        "--beta",
        "2",
        "--gamma",
        "1",
        "--i0",
        "0.001",
        "--horizon",
        "40",
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 0);

    let text = fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    let last = text.lines().last().unwrap();
    let fields: Vec<&str> = last.split(',').collect();
    assert_eq!(fields[0], "40");
    let c_final: f64 = fields[4].parse().unwrap();

    // Fixed point of z = 1 - s0 exp(-R0 z) for R0 = 2, s0 = 0.999.
    let (r0, s0) = (2.0_f64, 0.999_f64);
    let mut z = 0.5_f64;
    for _ in 0..200 {
        z = 1.0 - s0 * (-r0 * z).exp();
    }
    assert!(
        (c_final - z).abs() < 1e-4,
        "C(40) = {c_final}, fixed point {z}"
    );
}

#[test]
fn simulate_usage_errors_exit_one() {
    let dir = tempdir().unwrap();
    let out_dir = dir.path().to_str().unwrap();

    let zero_horizon = sirfit(&[
        "simulate", "--beta", "2", "--gamma", "1", "--horizon", "0", "--out-dir", out_dir,
    ]);
    assert_eq!(exit_code(&zero_horizon), 1);

    let both_sources = sirfit(&[
        "simulate",
        "--beta",
        "2",
        "--gamma",
        "1",
        "--posterior",
        "whatever.csv",
        "--out-dir",
        out_dir,
    ]);
    assert_eq!(exit_code(&both_sources), 1);

    let beta_alone = sirfit(&["simulate", "--beta", "2", "--out-dir", out_dir]);
    assert_eq!(exit_code(&beta_alone), 1);

    assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 0, "no artifacts");
}

#[test]
fn ensemble_simulation_without_a_seed_is_a_usage_error() {
    let dir = tempdir().unwrap();
    let fit_dir = dir.path().join("fit");
    assert_eq!(exit_code(&quick_fit(&fit_dir, &[])), 0);
    let out = sirfit(&[
        "simulate",
        "--posterior",
        fit_dir.join("posterior.csv").to_str().unwrap(),
        "--out-dir",
        dir.path().join("sim").to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 1);
    assert!(stderr_of(&out).contains("seed"));
}

#[test]
fn ensemble_simulation_reproduces_the_fit_peak_timing() {
    let dir = tempdir().unwrap();
    let fit_dir = dir.path().join("fit");
    assert_eq!(exit_code(&quick_fit(&fit_dir, &[])), 0);
    let report = read_json(&fit_dir.join("fit_report.json"));

    let sim_dir = dir.path().join("sim");
    let out = sirfit(&[
        "simulate",
        "--posterior",
        fit_dir.join("posterior.csv").to_str().unwrap(),
        "--i0",
        "0.001",
        "--horizon",
        "60",
        "--ensemble",
        "300",
        "--seed",
        "7",
        "--out-dir",
        sim_dir.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 0);

    let peak = read_json(&sim_dir.join("peak_timing.json"));
    assert_eq!(peak, report["peak"]);

    let ensemble = fs::read_to_string(sim_dir.join("ensemble.csv")).unwrap();
    let mut lines = ensemble.lines();
    assert_eq!(lines.next(), Some("day,median,lower95,upper95"));
    assert_eq!(lines.count(), 60);
}

#[test]
fn malformed_posterior_files_are_input_errors_with_line_numbers() {
    let dir = tempdir().unwrap();
    let posterior = dir.path().join("posterior.csv");
    let sim = |posterior: &Path| {
        sirfit(&[
            "simulate",
            "--posterior",
            posterior.to_str().unwrap(),
            "--seed",
            "1",
            "--out-dir",
            dir.path().join("sim").to_str().unwrap(),
        ])
    };

    fs::write(
        &posterior,
        "chain,iteration,beta,gamma,r,i0,log_posterior\n0,0,2.0,1.0,4.0,garbage,-10\n",
    )
    .unwrap();
    let bad_field = sim(&posterior);
    assert_eq!(exit_code(&bad_field), 1);
    assert!(stderr_of(&bad_field).contains(":2:"), "{}", stderr_of(&bad_field));

    fs::write(
        &posterior,
        "chain,iteration,beta,gamma,r,i0,log_posterior\n0,0,-2.0,1.0,4.0,0.001,-10\n",
    )
    .unwrap();
    let out_of_domain = sim(&posterior);
    assert_eq!(exit_code(&out_of_domain), 1);
    assert!(stderr_of(&out_of_domain).contains("beta"));
}

#[test]
fn an_outbreak_with_no_interior_peak_is_a_numerical_failure() {
    let dir = tempdir().unwrap();
    let out_dir = dir.path().join("sim");
    let out = sirfit(&[
        "simulate",
        "--beta",
        "1.05",
        "--gamma",
        "1",
        "--i0",
        "0.00001",
        "--horizon",
        "10",
        "--out-dir",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 2);
    assert!(!out_dir.exists(), "failed runs leave no partial artifacts");
}

#[test]
fn config_file_supplies_defaults_and_flags_override_it() {
    let dir = tempdir().unwrap();
    let out_dir = dir.path().join("run");
    let config = dir.path().join("run.conf");
    fs::write(
        &config,
        format!(
            "# demo fit settings\n\
             input = {DEMO_INPUT}\n\
             seed = 9\n\
             chains = 1\n\
             burn_in = 300\n\
             samples = 800\n\
             ensemble = 200\n\
             out-dir = {}\n",
            out_dir.display()
        ),
    )
    .unwrap();

    let out = sirfit(&["fit", "--config", config.to_str().unwrap(), "--samples", "600"]);
    assert_eq!(exit_code(&out), 0, "{}", stderr_of(&out));
    let report = read_json(&out_dir.join("fit_report.json"));
    assert_eq!(report["config"]["seed"], 9);
    assert_eq!(report["config"]["chains"], 1);
    assert_eq!(report["config"]["burn_in"], 300);
    assert_eq!(report["config"]["samples"], 600, "flag wins over file");
}
