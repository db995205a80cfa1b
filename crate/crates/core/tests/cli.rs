//! End-to-end runs of the command-line binary.

use std::path::Path;
use std::process::{Command, Output};

use chrono::NaiveDate;
use tempfile::TempDir;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_causal-neco")).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn simulate(dir: &Path, n: usize) -> std::path::PathBuf {
    let out = run(&[
        "simulate", "--p", "5", "--edges", "7", "--necof", "0.47", "--n", &n.to_string(),
        "--noise", "exponential", "--shock-every", "100", "--seed", "11", "--out", dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    dir.join("panel.csv")
}

#[test]
fn simulate_writes_outputs_and_echoes_settings() {
    let tmp = TempDir::new().unwrap();
    simulate(tmp.path(), 350);
    for f in ["panel.csv", "model.json", "graph.json", "manifest.json"] {
        assert!(tmp.path().join(f).exists(), "{f}");
    }
    let m = json(&tmp.path().join("manifest.json"));
    assert_eq!(m["settings"]["target_necof"], 0.47);
    assert_eq!(m["seed"], 11);
    assert_eq!(m["summary"]["n_edges"], 7);
    let achieved = m["summary"]["necof_market"].as_f64().unwrap();
    assert!((achieved - 0.47).abs() < 1e-3, "{achieved}");
    let rows = std::fs::read_to_string(tmp.path().join("panel.csv")).unwrap().lines().count();
    assert_eq!(rows, 351);
}

#[test]
fn invalid_settings_exit_with_usage_code() {
    let tmp = TempDir::new().unwrap();
    let out = run(&["simulate", "--necof", "1.5", "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(code(&out), 2);

    let panel = simulate(tmp.path(), 350);
    let out = run(&["backtest", "--panel", panel.to_str().unwrap(), "--alpha", "0", "--out", tmp.path().join("bt").to_str().unwrap()]);
    assert_eq!(code(&out), 2);
}

#[test]
fn missing_panel_exits_with_data_code() {
    let tmp = TempDir::new().unwrap();
    let out = run(&["discover", "--panel", tmp.path().join("nope.csv").to_str().unwrap()]);
    assert_eq!(code(&out), 4);
}

#[test]
fn backtest_writes_a_ten_row_table() {
    let tmp = TempDir::new().unwrap();
    let panel = simulate(tmp.path(), 350);
    let out_dir = tmp.path().join("bt");
    let out = run(&[
        "backtest", "--panel", panel.to_str().unwrap(), "--methods", "neco,varcovar,hist",
        "--boot-reps", "200", "--train", "250", "--test", "100", "--out", out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let mut reader = csv::Reader::from_path(out_dir.join("table.csv")).unwrap();
    assert_eq!(reader.headers().unwrap().len(), 4);
    assert_eq!(reader.records().count(), 10);
    for f in ["table.json", "cells.csv", "days.csv", "failures.json", "manifest.json"] {
        assert!(out_dir.join(f).exists(), "{f}");
    }
}

#[test]
fn command_line_beats_config_file() {
    let tmp = TempDir::new().unwrap();
    let cfg = tmp.path().join("run.toml");
    std::fs::write(&cfg, "[simulate]\np = 4\nn = 120\nseed = 3\nnecof = 0.3\n").unwrap();
    let out_dir = tmp.path().join("sim");
    let out = run(&["--config", cfg.to_str().unwrap(), "simulate", "--n", "80", "--out", out_dir.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let m = json(&out_dir.join("manifest.json"));
    assert_eq!(m["settings"]["p"], 4);
    assert_eq!(m["settings"]["n"], 80);
    assert_eq!(m["seed"], 3);

    std::fs::write(&cfg, "[simulate]\nbogus = 1\np = \"x\"\n").unwrap();
    let out = run(&["--config", cfg.to_str().unwrap(), "simulate", "--out", out_dir.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
}

#[test]
fn lag_aic_flags_exactly_one_row() {
    let tmp = TempDir::new().unwrap();
    let out = run(&["reproduce", "lag-aic", "--lmax", "5", "--p", "5", "--n", "500", "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let mut reader = csv::Reader::from_path(tmp.path().join("study_lag-aic_table.csv")).unwrap();
    let col = reader.headers().unwrap().iter().position(|h| h == "selected").unwrap();
    let rows: Vec<_> = reader.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 6);
    assert_eq!(rows.iter().filter(|r| &r[col] == "1").count(), 1);
}

#[test]
fn forecast_targets_the_next_day() {
    let tmp = TempDir::new().unwrap();
    let panel = simulate(tmp.path(), 300);
    let text = std::fs::read_to_string(&panel).unwrap();
    let last = text.lines().last().unwrap().split(',').next().unwrap();
    let next = NaiveDate::parse_from_str(last, "%Y-%m-%d").unwrap().succ_opt().unwrap().to_string();
    let out_dir = tmp.path().join("fc");
    let out = run(&[
        "forecast", "--panel", panel.to_str().unwrap(), "--methods", "neco,varcovar",
        "--alpha", "0.05", "--out", out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let mut reader = csv::Reader::from_path(out_dir.join("forecasts.csv")).unwrap();
    let rows: Vec<_> = reader.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 10);
    for r in &rows {
        assert_eq!(&r[0], next);
        assert!(r[4].parse::<f64>().unwrap() < 0.0);
    }
}

#[test]
fn compare_scores_an_external_forecast_file() {
    let tmp = TempDir::new().unwrap();
    let panel = simulate(tmp.path(), 200);
    let text = std::fs::read_to_string(&panel).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').skip(1).collect();
    let mut csv = String::from("time,instrument,method,alpha,var\n");
    for line in lines.skip(100) {
        let date = line.split(',').next().unwrap();
        for inst in &header {
            csv.push_str(&format!("{date},{inst},varcovar,0.05,-0.02\n"));
            csv.push_str(&format!("{date},{inst},mine,0.05,-0.03\n"));
        }
    }
    let fc = tmp.path().join("ext.csv");
    std::fs::write(&fc, csv).unwrap();
    let out_dir = tmp.path().join("cmp");
    let out = run(&[
        "compare", "--panel", panel.to_str().unwrap(), "--forecasts", fc.to_str().unwrap(), "--out", out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let t = json(&out_dir.join("table.json"));
    let cols: Vec<&str> = t["columns"].as_array().unwrap().iter().map(|c| c.as_str().unwrap()).collect();
    assert_eq!(cols.len(), 2);
    assert!(cols.contains(&"mine"));
    assert_eq!(t["n_cells"], serde_json::json!([5, 5]));
}
