//! End-to-end tests of the `twodsys` binary: output formats, determinism,
//! config precedence, and exit codes.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::tempdir;
use twodsys::gp;
use twodsys::kernel::HyperParams;
use twodsys::sde::{SimConfig, SystemSpec};
use twodsys::{GPModel, TimeSeries};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_twodsys"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn run_ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "command {:?} failed: {}",
        args,
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).expect("utf-8 output")
}

/// Parses a CSV body into (header, numeric rows).
fn parse_csv(text: &str) -> (String, Vec<Vec<f64>>) {
    let mut lines = text.lines();
    let header = lines.next().expect("header").to_string();
    let rows = lines
        .map(|l| l.split(',').map(|f| f.parse().expect("numeric field")).collect())
        .collect();
    (header, rows)
}

fn write_series(path: &Path) {
    let csv = run_ok(&[
        "sample",
        "--params",
        "0,2,0,0.5",
        "--grid",
        "0:0.25:60",
        "--seed",
        "3",
    ]);
    fs::write(path, csv).unwrap();
}

#[test]
fn eval_kernel_matches_closed_forms() {
    // At lag zero the covariance is the marginal variance e^{2k}.
    let (header, rows) = parse_csv(&run_ok(&[
        "eval-kernel",
        "--params",
        "0,0,0.5,0",
        "--grid",
        "0:1:0",
    ]));
    assert_eq!(header, "tau,c");
    assert_eq!(rows.len(), 1);
    assert!((rows[0][1] - 1.0f64.exp()).abs() < 1e-12);

    // With sigma = 1 and a unit oscillation rate the even part is
    // e^{-tau} cos(tau), which is -e^{-pi} at tau = pi.
    let ln2 = std::f64::consts::LN_2;
    let pi = std::f64::consts::PI;
    let (_, rows) = parse_csv(&run_ok(&[
        "eval-kernel",
        "--params",
        &format!("0,{ln2},0,0"),
        "--grid",
        &format!("{pi}:1:{pi}"),
    ]));
    assert!((rows[0][1] + (-pi).exp()).abs() < 1e-12);
}

#[test]
fn eval_kernel_gradient_columns_are_consistent() {
    let (header, rows) = parse_csv(&run_ok(&[
        "eval-kernel",
        "--params",
        "0.3,-1,0.2,0.6",
        "--grid",
        "0:0.5:3",
        "--gradients",
    ]));
    assert_eq!(header, "tau,c,dc_dh,dc_ds,dc_dk,dc_dp");
    assert_eq!(rows.len(), 7);
    for row in &rows {
        // The variance scale enters only through e^{2k}, so dc/dk = 2c.
        assert!((row[4] - 2.0 * row[1]).abs() <= 1e-12 * row[1].abs().max(1.0));
    }

    // Central finite difference in h against the reported column.
    let bump = 1e-6;
    let at = |h: f64| {
        parse_csv(&run_ok(&[
            "eval-kernel",
            "--params",
            &format!("{h},-1,0.2,0.6"),
            "--grid",
            "0:0.5:3",
        ]))
        .1
    };
    let (plus, minus) = (at(0.3 + bump), at(0.3 - bump));
    for (i, row) in rows.iter().enumerate() {
        let fd = (plus[i][1] - minus[i][1]) / (2.0 * bump);
        assert!(
            (row[2] - fd).abs() <= 1e-5 * row[2].abs().max(1.0),
            "dc_dh mismatch at tau {}: column {} vs fd {}",
            row[0],
            row[2],
            fd
        );
    }
}

#[test]
fn sample_is_deterministic_and_shaped() {
    let args = ["sample", "--params", "0,1,0,0.5", "--grid", "0:0.5:10", "--seed", "11", "--count", "3"];
    let first = run_ok(&args);
    let second = run_ok(&args);
    assert_eq!(first, second);
    let (header, rows) = parse_csv(&first);
    assert_eq!(header, "t,x0,x1,x2");
    assert_eq!(rows.len(), 21);
    assert!(rows.iter().all(|r| r.len() == 4));

    // A different seed changes the draw.
    let other = run_ok(&["sample", "--params", "0,1,0,0.5", "--grid", "0:0.5:10", "--seed", "12", "--count", "3"]);
    assert_ne!(first, other);

    // A single draw uses the plain t,x header.
    let (header, _) = parse_csv(&run_ok(&["sample", "--params", "0,1,0,0.5", "--grid", "0:1:2", "--seed", "1"]));
    assert_eq!(header, "t,x");
}

#[test]
fn sample_json_carries_the_draws() {
    let out = run_ok(&[
        "sample", "--params", "0,1,0,0.5", "--grid", "0:0.5:2", "--seed", "4",
        "--count", "2", "--format", "json",
    ]);
    let v: serde_json::Value = serde_json::from_str(&out).expect("valid json");
    assert_eq!(v["command"], "sample");
    assert_eq!(v["seed"], 4);
    assert_eq!(v["times"].as_array().unwrap().len(), 5);
    let draws = v["draws"].as_array().unwrap();
    assert_eq!(draws.len(), 2);
    assert_eq!(draws[0].as_array().unwrap().len(), 5);
    // The JSON draws match the CSV column for the same seed.
    let (_, rows) = parse_csv(&run_ok(&[
        "sample", "--params", "0,1,0,0.5", "--grid", "0:0.5:2", "--seed", "4", "--count", "2",
    ]));
    assert_eq!(draws[0][0].as_f64().unwrap(), rows[0][1]);
}

#[test]
fn fit_reports_a_likelihood_consistent_with_its_parameters() {
    let dir = tempdir().unwrap();
    let input = dir.path().join("series.csv");
    write_series(&input);
    let out = run_ok(&[
        "fit",
        "--input",
        input.to_str().unwrap(),
        "--restarts",
        "2",
        "--seed",
        "1",
    ]);
    let v: serde_json::Value = serde_json::from_str(&out).expect("valid json");
    assert_eq!(v["command"], "fit");
    assert_eq!(v["n_points"], 241);
    assert!(v["converged"].is_boolean());
    assert!(v["optimizer_trace"].as_array().unwrap().len() >= 2);

    // Rebuild the model the JSON describes and recompute its likelihood.
    let hyper = &v["params"]["hyper"];
    let theta = HyperParams::new(
        hyper["h"].as_f64().unwrap(),
        hyper["s"].as_f64().unwrap(),
        hyper["k"].as_f64().unwrap(),
        hyper["p"].as_f64().unwrap(),
    )
    .unwrap();
    let natural = theta.to_natural().unwrap();
    assert!((v["params"]["natural"]["sigma"].as_f64().unwrap() - natural.sigma).abs() < 1e-12);
    let model = GPModel::new(theta, v["mean"].as_f64().unwrap(), v["noise_var"].as_f64().unwrap())
        .unwrap();
    let (times, values): (Vec<f64>, Vec<f64>) = fs::read_to_string(&input)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| {
            let mut f = l.split(',');
            let t: f64 = f.next().unwrap().parse().unwrap();
            let x: f64 = f.next().unwrap().parse().unwrap();
            (t, x)
        })
        .unzip();
    let data = TimeSeries::new(times, values).unwrap();
    let reported = v["log_marginal_likelihood"].as_f64().unwrap();
    let recomputed = gp::log_marginal_likelihood_value(&model, &data).unwrap();
    assert!(
        (reported - recomputed).abs() <= 1e-9 * reported.abs().max(1.0),
        "reported {reported} vs recomputed {recomputed}"
    );
}

#[test]
fn classify_labels_an_oscillatory_series() {
    let dir = tempdir().unwrap();
    let input = dir.path().join("series.csv");
    write_series(&input);
    let out = run_ok(&[
        "classify",
        "--input",
        input.to_str().unwrap(),
        "--budget",
        "4000",
        "--seed",
        "2",
    ]);
    let v: serde_json::Value = serde_json::from_str(&out).expect("valid json");
    assert_eq!(v["label"], "oscillatory");
    assert!(v["log_odds"].as_f64().unwrap() > 0.0);
    assert_eq!(v["n_samples"], 4000);
    assert_eq!(v["method"], "monte-carlo");
    assert!(v["stderr"].as_f64().unwrap() > 0.0);

    // The deterministic quadrature agrees on the label and has no
    // sampling error.
    let out = run_ok(&[
        "classify",
        "--input",
        input.to_str().unwrap(),
        "--quadrature",
        "5",
    ]);
    let v: serde_json::Value = serde_json::from_str(&out).expect("valid json");
    assert_eq!(v["label"], "oscillatory");
    assert_eq!(v["method"]["grid"], 5);
    assert_eq!(v["stderr"], 0.0);
    assert_eq!(v["n_samples"], 2 * 5usize.pow(4));
}

#[test]
fn simulate_matches_the_library_path() {
    let out = run_ok(&[
        "simulate",
        "--system",
        "0.1,-1,1,0.1",
        "--noise",
        "0,0,0",
        "--dt",
        "0.1",
        "--total-time",
        "0.4",
        "--initial",
        "1,0",
        "--seed",
        "9",
    ]);
    let (header, rows) = parse_csv(&out);
    assert_eq!(header, "t,x1,x2");

    let spec = SystemSpec::new(0.1, -1.0, 1.0, 0.1, 0.0, 0.0, 0.0).unwrap();
    let mut cfg = SimConfig::new(0.1, 0.4, 9);
    cfg.initial_state = Some([1.0, 0.0]);
    let path = spec.simulate(&cfg).unwrap();
    assert_eq!(rows.len(), path.times.len());
    for (row, ((t, x1), x2)) in rows
        .iter()
        .zip(path.times.iter().zip(&path.x1).zip(&path.x2))
    {
        assert_eq!(row[0], *t);
        assert_eq!(row[1], *x1);
        assert_eq!(row[2], *x2);
    }
}

#[test]
fn figure_writes_the_full_gallery() {
    let dir = tempdir().unwrap();
    run_ok(&["figure", "--output-dir", dir.path().to_str().unwrap(), "--seed", "0"]);
    let mut names: Vec<String> = fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert_eq!(names.len(), 60);
    for s in [-2, -1, 0, 1, 2] {
        for p in ["-1.00", "0.00", "0.50", "0.75", "0.90", "1.00"] {
            assert!(names.contains(&format!("sample_s{s}_p{p}.csv")), "missing csv for {s},{p}");
            assert!(names.contains(&format!("sample_s{s}_p{p}.svg")), "missing svg for {s},{p}");
        }
    }
    let csv = fs::read_to_string(dir.path().join("sample_s-2_p-1.00.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1002);
    assert!(csv.starts_with("t,x\n0,"));
    let svg = fs::read_to_string(dir.path().join("sample_s2_p0.90.svg")).unwrap();
    assert!(svg.starts_with("<svg"));
    assert!(svg.contains("polyline"));
}

#[test]
fn config_file_supplies_defaults_and_flags_win() {
    let dir = tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"seed": 5, "params": [0.0, 1.0, 0.0, 0.0]}"#).unwrap();
    let cfg = cfg.to_str().unwrap();

    let from_config = run_ok(&["--config", cfg, "sample", "--grid", "0:1:3"]);
    let explicit = run_ok(&["sample", "--params", "0,1,0,0", "--grid", "0:1:3", "--seed", "5"]);
    assert_eq!(from_config, explicit);

    // An explicit flag overrides the config value.
    let overridden = run_ok(&["--config", cfg, "sample", "--grid", "0:1:3", "--seed", "6"]);
    assert_ne!(from_config, overridden);

    // Unknown config keys are rejected rather than silently ignored.
    let bad = dir.path().join("bad.json");
    fs::write(&bad, r#"{"sede": 5}"#).unwrap();
    let out = run(&["--config", bad.to_str().unwrap(), "sample", "--grid", "0:1:3", "--params", "0,1,0,0"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn data_errors_exit_with_code_two() {
    let dir = tempdir().unwrap();

    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "t,x\n0,1\nbad line here\n").unwrap();
    let out = run(&["fit", "--input", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("line 3"), "stderr should name the line: {stderr}");

    let headerless = dir.path().join("headerless.csv");
    fs::write(&headerless, "0,1\n1,2\n").unwrap();
    let out = run(&["fit", "--input", headerless.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("header"));

    let out = run(&["fit", "--input", dir.path().join("missing.csv").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));

    // Missing required parameters and malformed flag grammars.
    let out = run(&["eval-kernel", "--grid", "0:1:1"]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(&["eval-kernel", "--params", "0,0,0,0", "--grid", "1:0:2"]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(&["sample", "--params", "0,0,0,0", "--grid", "0:1:1", "--count", "0"]);
    assert_eq!(out.status.code(), Some(2));

    // Constraint violations in the parameters are data errors too.
    let out = run(&["eval-kernel", "--params", "nan,0,0,0", "--grid", "0:1:1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn numerical_failures_exit_with_code_three() {
    let dir = tempdir().unwrap();
    let input = dir.path().join("huge.csv");
    fs::write(&input, "t,x\n0,1e200\n1,-1e200\n2,1e200\n3,-1e200\n4,1e200\n").unwrap();
    let prior = dir.path().join("prior.json");
    fs::write(
        &prior,
        r#"{"h_range": [-2.0, 1.0], "s_range": [-4.0, 4.0], "k_range": [-1.0, 1.0],
           "j_prior": "uniform", "mean_prior": {"fixed": 0.0}, "noise_prior": {"fixed": 0.0}}"#,
    )
    .unwrap();
    let out = run(&[
        "classify",
        "--input",
        input.to_str().unwrap(),
        "--prior-file",
        prior.to_str().unwrap(),
        "--budget",
        "1000",
    ]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("underflow"));
}

#[test]
fn outputs_go_to_files_when_requested() {
    let dir = tempdir().unwrap();
    let path = dir.path().join("kernel.csv");
    let stdout = run_ok(&[
        "eval-kernel", "--params", "0,0,0,0", "--grid", "0:1:3",
        "--output", path.to_str().unwrap(),
    ]);
    assert!(stdout.is_empty());
    let (header, rows) = parse_csv(&fs::read_to_string(&path).unwrap());
    assert_eq!(header, "tau,c");
    assert_eq!(rows.len(), 4);
}
