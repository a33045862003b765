use std::f64::consts::{PI, TAU};
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use usm_core::dynamics::{summarize, AnalysisConfig, MotorTimeSeries, RunSummary};

fn usm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_usm"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn eigen_table_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("modes.csv");
    let out = usm(&["eigen", "--modes", "12", "--csv", csv.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = fs::read_to_string(&csv).unwrap();
    let rows: Vec<Vec<&str>> = text.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 12);
    let freqs: Vec<f64> = rows.iter().map(|r| r[1].parse().unwrap()).collect();
    assert!(freqs.windows(2).all(|w| w[1] >= w[0]));
    assert_eq!(freqs[0], 0.0);
    assert_eq!(rows.iter().filter(|r| r[3] == "true").count(), 2);
    assert!(String::from_utf8_lossy(&out.stdout).contains("drive pair"));
}

#[test]
fn coarse_mesh_is_a_config_error() {
    let out = usm(&["eigen", "--n-elements", "16"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("mesh too coarse"));
}

#[test]
fn frictionless_run_reports_zero() {
    let out = usm(&["run", "--cof", "0"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let v = json(&out);
    assert_eq!(v["reported_torque"].as_f64(), Some(0.0));
    assert_eq!(v["mean_speed"].as_f64(), Some(0.0));
}

#[test]
fn run_outputs_round_trip_and_repeat_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let (csv, summary) = (dir.path().join("ts.csv"), dir.path().join("s.json"));
    let args = ["run", "--csv", csv.to_str().unwrap(), "--summary", summary.to_str().unwrap()];
    let out = usm(&args);
    assert!(out.status.success(), "{}", stderr(&out));
    let first = (fs::read(&csv).unwrap(), fs::read(&summary).unwrap());
    let again = usm(&args);
    assert!(again.status.success());
    assert_eq!(first, (fs::read(&csv).unwrap(), fs::read(&summary).unwrap()));

    let series = MotorTimeSeries::read_csv(fs::File::open(&csv).unwrap(), "ts.csv").unwrap();
    assert_eq!(series.len(), 501);
    assert_eq!(series.t[500], 5e-3);
    let v: Value = serde_json::from_slice(&first.1).unwrap();
    let reported: RunSummary = serde_json::from_value(v.clone()).unwrap();
    let resummarized = summarize(
        &series,
        v["mean_radius"].as_f64().unwrap(),
        1.0 / v["drive_frequency"].as_f64().unwrap(),
        v["omega_ideal"].as_f64().unwrap(),
        &AnalysisConfig::default(),
    )
    .unwrap();
    assert_eq!(resummarized, reported);
}

#[test]
fn reversed_phase_negates_speed() {
    let fwd = json(&usm(&["run", "--duration", "2e-3"]));
    let rev = json(&usm(&["run", "--duration", "2e-3", "--phase", "-90deg"]));
    let (a, b) = (fwd["mean_speed"].as_f64().unwrap(), rev["mean_speed"].as_f64().unwrap());
    assert!(a > 0.0);
    assert!((a + b).abs() <= 1e-6 * a, "{a} vs {b}");
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    fs::write(&cfg, r#"{"schema_version": 1, "rotor": {"preload": 80}, "contact": {"cof": 0.3}}"#).unwrap();
    let out = usm(&["validate", "--config", cfg.to_str().unwrap(), "--preload", "20"]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(String::from_utf8_lossy(&out.stdout).contains("20 N preload"));

    fs::write(&cfg, r#"{"schema_version": 1, "stator_material": "Nope"}"#).unwrap();
    let out = usm(&["validate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));

    let out = usm(&["validate", "--config", dir.path().join("missing.json").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(5));
}

#[test]
fn divergence_exit_code() {
    let out = usm(&["run", "--kn", "1e15", "--duration", "1e-3"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).contains("divergence"));
}

#[test]
fn unsettled_exit_code() {
    let out = usm(&["run", "--preload", "25", "--duration", "6e-4"]);
    assert_eq!(out.status.code(), Some(4), "{}", stderr(&out));
    assert!(json(&out)["settled"] == Value::Bool(false));
}

#[test]
fn explicit_sweep_grid_with_plot() {
    let dir = tempfile::tempdir().unwrap();
    let (csv, svg) = (dir.path().join("s.csv"), dir.path().join("s.svg"));
    let out = usm(&[
        "sweep",
        "--param",
        "cof",
        "--values",
        "0.05:0.6:0.05",
        "--duration",
        "1e-3",
        "--jobs",
        "2",
        "--csv",
        csv.to_str().unwrap(),
        "--plot",
        svg.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().next(), Some("param,torque,speed,t_ss,settled"));
    assert_eq!(text.lines().count(), 13);
    assert!(fs::read_to_string(&svg).unwrap().contains("Coefficient of friction"));
    assert_eq!(json(&out)["rows"].as_u64(), Some(12));
}

#[test]
fn preset_sweeps_have_their_grids() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("p.csv");
    let out = usm(&["sweep", "--preset", "usr30_preload", "--duration", "5e-4", "--csv", csv.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    let params: Vec<f64> = fs::read_to_string(&csv)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').next().unwrap().parse().unwrap())
        .collect();
    assert_eq!(params, (1..=10).map(|i| 25.0 * i as f64).collect::<Vec<_>>());

    let out = usm(&["sweep", "--preset", "ultem_preload_g", "--duration", "5e-4", "--csv", csv.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    let params: Vec<f64> = fs::read_to_string(&csv)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').next().unwrap().parse().unwrap())
        .collect();
    assert_eq!(params.len(), 20);
    assert_eq!((params[0], params[19]), (20.0, 5000.0));
    let ratios: Vec<f64> = params.windows(2).map(|w| w[1] / w[0]).collect();
    assert!(ratios.iter().all(|r| (r - ratios[0]).abs() < 1e-9));
}

#[test]
fn bad_sweep_values_are_config_errors() {
    let out = usm(&["sweep", "--param", "cof", "--values", "0.3,0.1,0.2"]);
    assert_eq!(out.status.code(), Some(2));
    let out = usm(&["sweep", "--preset", "nope"]);
    assert_eq!(out.status.code(), Some(2));
}

fn write_grid(path: &Path, rows: usize, cols: usize, f: impl Fn(usize, usize) -> f64) {
    let text: String = (0..rows)
        .map(|i| (0..cols).map(|j| format!("{:.17e}", f(i, j))).collect::<Vec<_>>().join(",") + "\n")
        .collect();
    fs::write(path, text).unwrap();
}

#[test]
fn roughness_checkerboard_and_sinusoids() {
    let dir = tempfile::tempdir().unwrap();
    let board = dir.path().join("board.csv");
    write_grid(&board, 8, 8, |i, j| if (i + j) % 2 == 0 { 3.0 } else { -3.0 });
    let out = usm(&["roughness", board.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    let v = json(&out);
    assert!((v["samples"][0]["Sa"].as_f64().unwrap() - 3.0).abs() < 1e-12);
    assert_eq!(v["area_size"].as_f64(), Some(64.0));

    // whole-period cosines are even about the map centre, so leveling
    // leaves them untouched
    let a = 0.5;
    let mut paths = Vec::new();
    for k in 1..=5 {
        let p = dir.path().join(format!("s{k}.csv"));
        let cols = 2000;
        write_grid(&p, 4, cols, |_, j| {
            let x = (j as f64 + 0.5) / cols as f64;
            a * k as f64 * (TAU * 4.0 * x).cos()
        });
        paths.push(p);
    }
    let mut args = vec!["roughness", "--dx", "0.5"];
    args.extend(paths.iter().map(|p| p.to_str().unwrap()));
    let out = usm(&args);
    assert!(out.status.success(), "{}", stderr(&out));
    let mean = json(&out)["mean_Sa"].as_f64().unwrap();
    let expect = 2.0 * a / PI * 3.0;
    assert!((mean - expect).abs() < 1e-5 * expect, "{mean} vs {expect}");
}

#[test]
fn roughness_file_errors_name_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("absent.csv");
    let out = usm(&["roughness", missing.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(5));
    assert!(stderr(&out).contains("absent.csv"));

    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "1,2\n3,oops\n").unwrap();
    let out = usm(&["roughness", bad.to_str().unwrap()]);
    assert_ne!(out.status.code(), Some(0));
    let msg = stderr(&out);
    assert!(msg.contains("bad.csv") && msg.contains("row 2") && msg.contains("column 2"), "{msg}");
}
