use std::collections::BTreeMap;
use std::fs::File;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::*;
use crate::backtest::{aggregate, evaluate, rolling_backtest, AggregateStats, BacktestConfig, ComparisonTable};
use crate::copula::{latent_row, to_latent};
use crate::discovery::{self, CITestConfig};
use crate::engines::{
    fhs_var, fit_garch11, garch_var, hist_var, varcovar_var, write_forecasts_csv, NecoForecaster, VaRForecast,
    VarMethod, DEFAULT_BOOT_REPS, DEFAULT_MC_PATHS,
};
use crate::graph::CausalGraph;
use crate::panel::{make_windows, parse_panel_csv, PanelMode, ReturnPanel};
use crate::rng::derive_seed;
use crate::sem::{fit_sem, necof, select_lags, CovarianceMode};
use crate::simulation::{lag_aic_study, run_study, timing_study, StudyConfig, StudyKind};
use crate::simulation::{benchmark_network, model_from_config, simulate_sem, Noise, SimConfig};

const DEFAULT_SEED: u64 = 1;

fn require<T>(value: Option<T>, flag: &str) -> CliResult<T> {
    value.ok_or_else(|| CliError::usage(format!("missing required --{flag}")))
}

fn data_err(e: impl std::fmt::Display) -> CliError {
    CliError {
        code: EXIT_DATA,
        message: e.to_string(),
    }
}

fn create_dir(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(|e| data_err(format!("cannot create {}: {e}", dir.display())))
}

fn create_file(path: &Path) -> CliResult<File> {
    File::create(path).map_err(|e| data_err(format!("cannot write {}: {e}", path.display())))
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    std::fs::write(path, text).map_err(|e| data_err(format!("cannot write {}: {e}", path.display())))
}

fn read_text(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| data_err(format!("cannot read {}: {e}", path.display())))
}

#[derive(Serialize)]
struct Manifest<'a, S: Serialize> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    seed: Option<u64>,
    settings: &'a S,
    outputs: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    summary: Option<serde_json::Value>,
}

fn write_manifest<S: Serialize>(
    dir: &Path,
    command: &str,
    seed: Option<u64>,
    settings: &S,
    outputs: &[&str],
    summary: Option<serde_json::Value>,
) -> CliResult<()> {
    let m = Manifest {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        command,
        seed,
        settings,
        outputs: outputs.iter().map(|s| s.to_string()).collect(),
        summary,
    };
    let text = serde_json::to_string_pretty(&m).map_err(data_err)?;
    write_text(&dir.join("manifest.json"), &text)
}

fn load_panel(args: &PanelArgs) -> CliResult<ReturnPanel> {
    let path = require(args.panel.as_ref(), "panel")?;
    let mode = if args.prices.unwrap_or(false) {
        PanelMode::Prices
    } else {
        PanelMode::LogReturns
    };
    Ok(parse_panel_csv(path, mode)?)
}

fn ci_config(args: &DiscoveryArgs) -> CliResult<CITestConfig> {
    let d = CITestConfig::default();
    let cfg = CITestConfig {
        alpha_ci: args.alpha_ci.unwrap_or(d.alpha_ci),
        max_cond_size: args.max_cond.or(d.max_cond_size),
    };
    cfg.validate()?;
    Ok(cfg)
}

fn parse_methods(names: Option<&Vec<String>>) -> CliResult<Vec<VarMethod>> {
    let Some(names) = names else {
        return Ok(VarMethod::ALL.to_vec());
    };
    let mut out = Vec::new();
    for n in names {
        let m: VarMethod = n.trim().parse().map_err(|e: NecoError| CliError::usage(e.to_string()))?;
        if !out.contains(&m) {
            out.push(m);
        }
    }
    if out.is_empty() {
        return Err(CliError::usage("no methods selected"));
    }
    Ok(out)
}

fn date_strings(panel: &ReturnPanel) -> Vec<String> {
    panel.times().iter().map(|d| d.format("%Y-%m-%d").to_string()).collect()
}

fn out_dir(out: Option<&PathBuf>) -> CliResult<PathBuf> {
    let dir = require(out.cloned(), "out")?;
    create_dir(&dir)?;
    Ok(dir)
}

pub(super) fn simulate(a: SimulateArgs) -> CliResult<i32> {
    let d = SimConfig::default();
    let noise = match a.noise.as_deref() {
        Some(s) => s.parse::<Noise>()?,
        None => d.noise,
    };
    let cfg = SimConfig {
        p: a.p.unwrap_or(d.p),
        density: a.density.unwrap_or(d.density),
        n_edges: a.edges,
        target_necof: a.necof,
        lags: a.lags.unwrap_or(d.lags),
        ar_scale: a.ar_scale.unwrap_or(d.ar_scale),
        noise,
        sigma: a.sigma.unwrap_or(d.sigma),
        shock_period: a.shock_every,
        shock_scale: a.shock_scale.unwrap_or(d.shock_scale),
        n: a.n.unwrap_or(d.n),
        burn_in: a.burn_in.unwrap_or(d.burn_in),
        seed: a.seed.unwrap_or(d.seed),
    };
    cfg.validate()?;
    let benchmark = a.benchmark.unwrap_or(false).then(benchmark_network);
    if let Some(g) = &benchmark {
        if cfg.p != g.p {
            return Err(CliError::usage(format!("the benchmark network has {} instruments", g.p)));
        }
    }
    let dir = out_dir(a.out.as_ref())?;
    let model = model_from_config(&cfg, benchmark.as_ref())?;
    let panel = simulate_sem(&model, &cfg)?;

    panel.write_csv(create_file(&dir.join("panel.csv"))?)?;
    write_text(&dir.join("model.json"), &model.to_json()?)?;
    write_text(&dir.join("graph.json"), &model.graph.to_json()?)?;
    let achieved = necof(&model);
    let summary = serde_json::json!({
        "necof_market": achieved.market,
        "necof_per_node": achieved.per_node,
        "n_edges": model.graph.n_edges(),
        "density": model.graph.density(),
    });
    write_manifest(
        &dir,
        "simulate",
        Some(cfg.seed),
        &cfg,
        &["panel.csv", "model.json", "graph.json"],
        Some(summary),
    )?;
    Ok(EXIT_OK)
}

pub(super) fn discover(a: DiscoverArgs) -> CliResult<i32> {
    let panel = load_panel(&a.panel)?;
    let ci = ci_config(&a.discovery)?;
    let dir = out_dir(a.out.as_ref())?;
    let (latent, _) = to_latent(&panel)?;
    let graph = crate::discovery::discover(latent.values(), latent.instruments().to_vec(), &ci)?;
    write_text(&dir.join("graph.json"), &graph.to_json()?)?;
    let summary = serde_json::json!({
        "n_edges": graph.n_edges(),
        "fully_directed": graph.is_fully_directed(),
    });
    write_manifest(&dir, "discover", None, &a, &["graph.json"], Some(summary))?;
    Ok(EXIT_OK)
}

fn graph_for(path: Option<&PathBuf>, latent: &crate::copula::LatentPanel, ci: &CITestConfig) -> CliResult<CausalGraph> {
    match path {
        Some(p) => {
            let g = CausalGraph::from_json(&read_text(p)?)?;
            if g.labels != latent.instruments() {
                return Err(CliError::usage("graph labels do not match the panel instruments"));
            }
            Ok(g)
        }
        None => Ok(discovery::discover(latent.values(), latent.instruments().to_vec(), ci)?),
    }
}

pub(super) fn fit(a: FitArgs) -> CliResult<i32> {
    let panel = load_panel(&a.panel)?;
    let ci = ci_config(&a.discovery)?;
    if a.lags.is_some() && a.max_lags.is_some() {
        return Err(CliError::usage("--lags and --max-lags are mutually exclusive"));
    }
    let dir = out_dir(a.out.as_ref())?;
    let (latent, _) = to_latent(&panel)?;
    let graph = graph_for(a.graph.as_ref(), &latent, &ci)?;

    let mut outputs = vec!["graph.json", "model.json", "ensemble.json", "necof.json"];
    let lags = match a.max_lags {
        Some(max) => {
            let sel = select_lags(&latent, &graph, max)?;
            let mut w = csv::Writer::from_writer(create_file(&dir.join("lag_selection.csv"))?);
            w.write_record(["lags", "k", "loglik", "aic", "selected"]).map_err(data_err)?;
            for c in &sel.candidates {
                w.write_record([
                    c.lags.to_string(),
                    c.k.to_string(),
                    crate::panel::fmt_num(c.loglik),
                    crate::panel::fmt_num(c.aic),
                    ((c.lags == sel.chosen_lags) as u8).to_string(),
                ])
                .map_err(data_err)?;
            }
            w.flush().map_err(data_err)?;
            outputs.push("lag_selection.csv");
            sel.chosen_lags
        }
        None => a.lags.unwrap_or(1),
    };
    let ensemble = fit_sem(&latent, &graph, lags)?;
    write_text(&dir.join("graph.json"), &graph.to_json()?)?;
    write_text(&dir.join("model.json"), &ensemble.primary().to_json()?)?;
    let members: Vec<serde_json::Value> = ensemble
        .models
        .iter()
        .map(|m| m.to_json().and_then(|s| Ok(serde_json::from_str(&s)?)))
        .collect::<crate::Result<_>>()?;
    let ens = serde_json::json!({ "primary_index": ensemble.primary_index, "models": members });
    write_text(&dir.join("ensemble.json"), &serde_json::to_string_pretty(&ens).map_err(data_err)?)?;
    let nf = necof(ensemble.primary());
    write_text(&dir.join("necof.json"), &serde_json::to_string_pretty(&nf).map_err(data_err)?)?;
    let summary = serde_json::json!({ "lags": lags, "members": ensemble.len(), "necof_market": nf.market });
    write_manifest(&dir, "fit", None, &a, &outputs, Some(summary))?;
    Ok(EXIT_OK)
}

struct EngineSettings {
    methods: Vec<VarMethod>,
    alpha: f64,
    lags: usize,
    boot_reps: usize,
    mc_paths: usize,
    seed: u64,
}

fn engine_settings(e: &EngineArgs) -> CliResult<EngineSettings> {
    let s = EngineSettings {
        methods: parse_methods(e.methods.as_ref())?,
        alpha: e.alpha.unwrap_or(0.05),
        lags: e.lags.unwrap_or(1),
        boot_reps: e.boot_reps.unwrap_or(DEFAULT_BOOT_REPS),
        mc_paths: e.mc_paths.unwrap_or(DEFAULT_MC_PATHS),
        seed: e.seed.unwrap_or(DEFAULT_SEED),
    };
    crate::engines::check_alpha(s.alpha)?;
    if s.boot_reps == 0 || s.mc_paths == 0 {
        return Err(CliError::usage("--boot-reps and --mc-paths must be positive"));
    }
    Ok(s)
}

fn neco_forecast(train: &ReturnPanel, ci: &CITestConfig, s: &EngineSettings) -> crate::Result<VaRForecast> {
    let (latent, marginals) = to_latent(train)?;
    let graph = discovery::discover(latent.values(), latent.instruments().to_vec(), ci)?;
    let ensemble = fit_sem(&latent, &graph, s.lags)?;
    let forecaster = NecoForecaster::new(&ensemble, marginals.clone(), s.alpha, CovarianceMode::Estimated)?;
    let n = train.n_obs();
    let p = train.n_instruments();
    let mut history = DMatrix::zeros(s.lags, p);
    for (r, src) in (n - s.lags..n).enumerate() {
        let row: Vec<f64> = train.values().row(src).iter().copied().collect();
        for (j, z) in latent_row(&marginals, &row).into_iter().enumerate() {
            history[(r, j)] = z;
        }
    }
    let mut f = forecaster.forecast(&history)?;
    f.index = n;
    Ok(f)
}

pub(super) fn forecast(a: ForecastArgs) -> CliResult<i32> {
    let panel = load_panel(&a.panel)?;
    let ci = ci_config(&a.discovery)?;
    let s = engine_settings(&a.engine)?;
    let n = panel.n_obs();
    let train_len = a.train.unwrap_or(n);
    if train_len == 0 || train_len > n {
        return Err(CliError::usage(format!("--train must lie in 1..={n}")));
    }
    if s.lags >= train_len {
        return Err(CliError::usage("--lags must be smaller than the training length"));
    }
    let train = panel.slice_rows(n - train_len..n)?;
    let dir = out_dir(a.out.as_ref())?;

    let mut forecasts = Vec::new();
    let mut failures = Vec::new();
    for (mi, &method) in s.methods.iter().enumerate() {
        let mseed = derive_seed(s.seed, &[mi as u64]);
        let result = match method {
            VarMethod::Neco => neco_forecast(&train, &ci, &s),
            VarMethod::VarCovar => varcovar_var(&train, s.alpha),
            VarMethod::Hist => hist_var(&train, s.alpha, s.boot_reps, mseed),
            VarMethod::Garch | VarMethod::Fhs => {
                let fallback = varcovar_var(&train, s.alpha);
                let mut values = Vec::with_capacity(train.n_instruments());
                for j in 0..train.n_instruments() {
                    let col = train.column(j);
                    let cell_seed = derive_seed(mseed, &[j as u64]);
                    let v = fit_garch11(&col, None).and_then(|fit| match method {
                        VarMethod::Garch => garch_var(&fit, s.alpha, s.mc_paths, cell_seed),
                        _ => fhs_var(&col, &fit, s.alpha, s.boot_reps, cell_seed),
                    });
                    match (v, &fallback) {
                        (Ok(v), _) => values.push(v),
                        (Err(e), Ok(fb)) => {
                            failures.push(format!("{method} {}: {e}; using VarCovar", train.instruments()[j]));
                            values.push(fb.values[j]);
                        }
                        (Err(e), Err(_)) => {
                            failures.push(format!("{method} {}: {e}", train.instruments()[j]));
                            values.push(f64::NAN);
                        }
                    }
                }
                if values.iter().any(|v| !v.is_finite()) {
                    Err(NecoError::FitError(format!("{method} failed for some instruments")))
                } else {
                    VaRForecast::new(method, s.alpha, values, train_len)
                }
            }
        };
        match result {
            Ok(mut f) => {
                f.index = train_len;
                forecasts.push(f);
            }
            Err(e) => failures.push(format!("{method}: {e}")),
        }
    }
    let mut times = date_strings(&train);
    let next = train.times().last().and_then(|d| d.succ_opt());
    times.push(next.map(|d| d.format("%Y-%m-%d").to_string()).unwrap_or_default());
    write_forecasts_csv(create_file(&dir.join("forecasts.csv"))?, &forecasts, train.instruments(), &times)?;
    for f in &failures {
        eprintln!("warning: {f}");
    }
    let summary = serde_json::json!({ "failures": failures });
    write_manifest(&dir, "forecast", Some(s.seed), &a, &["forecasts.csv"], Some(summary))?;
    Ok(if failures.is_empty() { EXIT_OK } else { EXIT_PARTIAL })
}

pub(super) fn backtest(a: BacktestArgs) -> CliResult<i32> {
    let panel = load_panel(&a.panel)?;
    let ci = ci_config(&a.discovery)?;
    let s = engine_settings(&a.engine)?;
    let train = a.train.unwrap_or(250);
    let test = a.test.unwrap_or(100);
    let plan = make_windows(panel.n_obs(), train, test, a.stride.unwrap_or(test))?;
    let cfg = BacktestConfig {
        alpha: s.alpha,
        methods: s.methods.clone(),
        neco_lags: s.lags,
        ci,
        covariance_mode: CovarianceMode::Estimated,
        boot_reps: s.boot_reps,
        mc_paths: s.mc_paths,
        dq_lags: a.dq_lags.unwrap_or(crate::backtest::DEFAULT_DQ_LAGS),
    };
    let dir = out_dir(a.out.as_ref())?;
    let output = rolling_backtest(&panel, &plan, &cfg, s.seed)?;
    let table = aggregate(&output);
    table.write_csv(create_file(&dir.join("table.csv"))?)?;
    write_text(&dir.join("table.json"), &table.to_json()?)?;
    output.write_cells_csv(create_file(&dir.join("cells.csv"))?)?;
    output.write_days_csv(create_file(&dir.join("days.csv"))?, &date_strings(&panel))?;
    write_text(
        &dir.join("failures.json"),
        &serde_json::to_string_pretty(&output.failures).map_err(data_err)?,
    )?;
    for f in &output.failures {
        let what = if f.fallback { "scored with VarCovar" } else { "skipped" };
        eprintln!("warning: window {} {}: {} ({what})", f.window, f.method, f.message);
    }
    let summary = serde_json::json!({
        "windows": plan.windows.len(),
        "resolved": cfg,
        "failures": output.failures.len(),
    });
    write_manifest(
        &dir,
        "backtest",
        Some(s.seed),
        &a,
        &["table.csv", "table.json", "cells.csv", "days.csv", "failures.json"],
        Some(summary),
    )?;
    Ok(if output.failures.is_empty() { EXIT_OK } else { EXIT_PARTIAL })
}

#[derive(Debug, Deserialize)]
struct ForecastRow {
    time: String,
    instrument: String,
    method: String,
    alpha: f64,
    var: f64,
}

fn column_label(method: &str) -> String {
    method
        .parse::<VarMethod>()
        .map(|m| m.display_name().to_string())
        .unwrap_or_else(|_| method.to_string())
}

pub(super) fn compare(a: CompareArgs) -> CliResult<i32> {
    let panel = load_panel(&a.panel)?;
    let path = require(a.forecasts.as_ref(), "forecasts")?;
    let mut reader = csv::Reader::from_path(path).map_err(data_err)?;
    let rows: Vec<ForecastRow> = reader.deserialize().collect::<Result<_, _>>().map_err(data_err)?;
    if rows.is_empty() {
        return Err(data_err("forecast file has no rows"));
    }
    let alpha = match a.alpha {
        Some(x) => {
            crate::engines::check_alpha(x)?;
            x
        }
        None => {
            let first = rows[0].alpha;
            if rows.iter().any(|r| (r.alpha - first).abs() > 1e-12) {
                return Err(CliError::usage("forecasts hold several alpha levels; pick one with --alpha"));
            }
            first
        }
    };
    crate::engines::check_alpha(alpha)?;
    let dq_lags = a.dq_lags.unwrap_or(crate::backtest::DEFAULT_DQ_LAGS);

    let times: BTreeMap<String, usize> = date_strings(&panel).into_iter().enumerate().map(|(i, t)| (t, i)).collect();
    let columns: BTreeMap<&str, usize> =
        panel.instruments().iter().enumerate().map(|(j, s)| (s.as_str(), j)).collect();

    let mut methods: Vec<String> = Vec::new();
    let mut groups: BTreeMap<(String, String), Vec<(usize, f64)>> = BTreeMap::new();
    for r in rows.iter().filter(|r| (r.alpha - alpha).abs() <= 1e-12) {
        let row = *times
            .get(&r.time)
            .ok_or_else(|| data_err(format!("forecast time {} is not in the panel", r.time)))?;
        if !columns.contains_key(r.instrument.as_str()) {
            return Err(data_err(format!("unknown instrument {}", r.instrument)));
        }
        if !methods.contains(&r.method) {
            methods.push(r.method.clone());
        }
        groups
            .entry((r.method.clone(), r.instrument.clone()))
            .or_default()
            .push((row, r.var));
    }
    if methods.is_empty() {
        return Err(CliError::usage(format!("no forecasts at alpha {alpha}")));
    }

    let mut reports: BTreeMap<String, Vec<crate::backtest::BacktestReport>> = BTreeMap::new();
    for ((method, instrument), mut days) in groups {
        days.sort_by_key(|d| d.0);
        if days.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(data_err(format!("duplicate forecast day for {method}/{instrument}")));
        }
        let j = columns[instrument.as_str()];
        let returns: Vec<f64> = days.iter().map(|d| panel.values()[(d.0, j)]).collect();
        let var: Vec<f64> = days.iter().map(|d| d.1).collect();
        reports.entry(method).or_default().push(evaluate(&returns, &var, alpha, dq_lags)?);
    }
    let labels: Vec<String> = methods.iter().map(|m| column_label(m)).collect();
    let stats: Vec<AggregateStats> = methods
        .iter()
        .zip(&labels)
        .map(|(m, l)| AggregateStats::from_reports(l, reports[m].iter()))
        .collect();
    let reference = methods.iter().position(|m| m == VarMethod::Neco.tag()).unwrap_or(0);
    let table = ComparisonTable::new(labels, stats, reference);

    let dir = out_dir(a.out.as_ref())?;
    table.write_csv(create_file(&dir.join("table.csv"))?)?;
    write_text(&dir.join("table.json"), &table.to_json()?)?;
    write_manifest(&dir, "compare", None, &a, &["table.csv", "table.json"], None)?;
    Ok(EXIT_OK)
}

pub(super) fn reproduce(a: ReproduceArgs) -> CliResult<i32> {
    let dir = match &a.out {
        Some(d) => d.clone(),
        None => PathBuf::from(format!("reproduce_{}", a.study)),
    };
    let d = StudyConfig::default();
    let seed = a.seed.unwrap_or(d.seed);
    match a.study.as_str() {
        "timing" => {
            let p_values = a.p_values.clone().unwrap_or_else(|| vec![5, 10, 20, 50]);
            let reps = a.reps.unwrap_or(100);
            if reps == 0 || p_values.iter().any(|&p| p < 2) {
                return Err(CliError::usage("timing needs reps >= 1 and every p >= 2"));
            }
            create_dir(&dir)?;
            let rows = timing_study(&p_values, reps, seed)?;
            let mut w = csv::Writer::from_writer(create_file(&dir.join("study_timing_table.csv"))?);
            w.write_record(["p", "mean_ms", "reps"]).map_err(data_err)?;
            for r in &rows {
                w.write_record([r.p.to_string(), format!("{:.3}", r.mean_ms), r.reps.to_string()])
                    .map_err(data_err)?;
            }
            w.flush().map_err(data_err)?;
            write_manifest(&dir, "reproduce timing", Some(seed), &a, &["study_timing_table.csv"], None)?;
            Ok(EXIT_OK)
        }
        "lag-aic" => {
            let p = a.p.unwrap_or(20);
            let n = a.n.unwrap_or(1000);
            let lmax = a.lmax.unwrap_or(5);
            create_dir(&dir)?;
            let rows = lag_aic_study(p, n, lmax, StudyConfig::default().ar_scale, seed)?;
            let mut w = csv::Writer::from_writer(create_file(&dir.join("study_lag-aic_table.csv"))?);
            w.write_record(["lags", "k", "loglik", "aic", "selected"]).map_err(data_err)?;
            for r in &rows {
                w.write_record([
                    r.lags.to_string(),
                    r.k.to_string(),
                    crate::panel::fmt_num(r.loglik),
                    crate::panel::fmt_num(r.aic),
                    (r.selected as u8).to_string(),
                ])
                .map_err(data_err)?;
            }
            w.flush().map_err(data_err)?;
            write_manifest(&dir, "reproduce lag-aic", Some(seed), &a, &["study_lag-aic_table.csv"], None)?;
            Ok(EXIT_OK)
        }
        name => {
            let kind: StudyKind = name.parse()?;
            let methods = parse_methods(a.methods.as_ref())?;
            let mut cfg = StudyConfig {
                reps: a.reps.unwrap_or(d.reps),
                train: a.train.unwrap_or(d.train),
                test: a.test.unwrap_or(d.test),
                alphas: a.alphas.clone().unwrap_or(d.alphas.clone()),
                levels: a.levels.clone(),
                methods,
                seed,
                ..d
            };
            if let Some(b) = a.boot_reps {
                cfg.backtest.boot_reps = b;
            }
            if let Some(m) = a.mc_paths {
                cfg.backtest.mc_paths = m;
            }
            cfg.validate()?;
            cfg.backtest.validate()?;
            create_dir(&dir)?;
            let out = run_study(kind, &cfg)?;
            out.write(&dir)?;
            let summary = serde_json::json!({
                "skipped_cells": out.skipped_cells,
                "fallback_cells": out.fallback_cells,
                "resolved": cfg,
            });
            let files = [
                format!("study_{name}_table.csv"),
                format!("study_{name}_table.json"),
                format!("study_{name}_trace.csv"),
            ];
            let files: Vec<&str> = files.iter().map(|s| s.as_str()).collect();
            write_manifest(&dir, &format!("reproduce {name}"), Some(seed), &a, &files, Some(summary))?;
            Ok(if out.skipped_cells > 0 { EXIT_PARTIAL } else { EXIT_OK })
        }
    }
}
