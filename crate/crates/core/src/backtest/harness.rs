//! Rolling-window comparison of VaR engines.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::backtest::{evaluate, BacktestReport, DEFAULT_DQ_LAGS};
use crate::copula::{latent_row, to_latent};
use crate::discovery::{discover, CITestConfig};
use crate::engines::{
    check_alpha, fhs_standardized_quantile, fit_garch11, hist_var, mc_normal_quantile, varcovar_var,
    z_alpha, GarchFit, NecoForecaster, VarMethod, DEFAULT_BOOT_REPS, DEFAULT_MC_PATHS,
};
use crate::error::{NecoError, Result};
use crate::panel::{fmt_num, ReturnPanel, Window, WindowPlan};
use crate::rng::derive_seed;
use crate::sem::{fit_sem, CovarianceMode};
use crate::stats::{mean, sample_std};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BacktestConfig {
    pub alpha: f64,
    pub methods: Vec<VarMethod>,
    /// Own-lag order of the NECO structural model.
    pub neco_lags: usize,
    pub ci: CITestConfig,
    pub covariance_mode: CovarianceMode,
    pub boot_reps: usize,
    pub mc_paths: usize,
    pub dq_lags: usize,
}

impl Default for BacktestConfig {
    fn default() -> Self {
        Self {
            alpha: 0.05,
            methods: VarMethod::ALL.to_vec(),
            neco_lags: 1,
            ci: CITestConfig::default(),
            covariance_mode: CovarianceMode::Estimated,
            boot_reps: DEFAULT_BOOT_REPS,
            mc_paths: DEFAULT_MC_PATHS,
            dq_lags: DEFAULT_DQ_LAGS,
        }
    }
}

impl BacktestConfig {
    pub fn validate(&self) -> Result<()> {
        check_alpha(self.alpha)?;
        self.ci.validate()?;
        if self.methods.is_empty() {
            return Err(NecoError::InvalidConfig("no methods selected".into()));
        }
        if self.boot_reps == 0 || self.mc_paths == 0 {
            return Err(NecoError::InvalidConfig("boot_reps and mc_paths must be positive".into()));
        }
        Ok(())
    }

    /// Reference column for CompareQL: Causal-NECO when present.
    pub fn reference_method(&self) -> VarMethod {
        if self.methods.contains(&VarMethod::Neco) {
            VarMethod::Neco
        } else {
            self.methods[0]
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub window: usize,
    pub method: VarMethod,
    pub instrument: usize,
    pub report: BacktestReport,
}

/// A method that could not be fitted on a window. With `fallback` set the
/// cell was scored with variance-covariance VaR instead of being skipped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitFailure {
    pub window: usize,
    pub method: VarMethod,
    pub instrument: Option<usize>,
    pub message: String,
    pub fallback: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DayRecord {
    pub window: usize,
    pub method: VarMethod,
    /// Row of the forecast day in the panel.
    pub row: usize,
    pub instrument: usize,
    pub var: f64,
    pub ret: f64,
    pub hit: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestOutput {
    pub alpha: f64,
    pub instruments: Vec<String>,
    pub methods: Vec<VarMethod>,
    pub cells: Vec<CellReport>,
    pub failures: Vec<FitFailure>,
    pub days: Vec<DayRecord>,
}

impl BacktestOutput {
    /// True when some (method, window) cell was skipped outright.
    pub fn has_skipped_cells(&self) -> bool {
        self.failures.iter().any(|f| !f.fallback)
    }

    /// Tidy per-day CSV: `window,time,instrument,method,alpha,var,return,hit`.
    pub fn write_days_csv<W: std::io::Write>(&self, writer: W, times: &[String]) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["window", "time", "instrument", "method", "alpha", "var", "return", "hit"])?;
        for d in &self.days {
            let time = times.get(d.row).cloned().unwrap_or_else(|| d.row.to_string());
            w.write_record([
                d.window.to_string(),
                time,
                self.instruments[d.instrument].clone(),
                d.method.tag().to_string(),
                fmt_num(self.alpha),
                fmt_num(d.var),
                fmt_num(d.ret),
                (d.hit as u8).to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Per-(window, method, instrument) report CSV.
    pub fn write_cells_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record([
            "window", "method", "instrument", "n_obs", "n1", "alpha_hat", "ae", "lr_uc", "lr_uc_p",
            "lr_cc", "lr_cc_p", "dq", "dq_p", "dq_degenerate", "ad_mean", "ad_max", "ad_empty", "ql",
        ])?;
        for c in &self.cells {
            let r = &c.report;
            w.write_record([
                c.window.to_string(),
                c.method.tag().to_string(),
                self.instruments[c.instrument].clone(),
                r.n_obs.to_string(),
                r.n1.to_string(),
                fmt_num(r.alpha_hat),
                fmt_num(r.ae),
                fmt_num(r.lr_uc.statistic),
                fmt_num(r.lr_uc.pvalue),
                fmt_num(r.lr_cc.statistic),
                fmt_num(r.lr_cc.pvalue),
                fmt_num(r.dq.statistic),
                fmt_num(r.dq.pvalue),
                (r.dq.degenerate as u8).to_string(),
                fmt_num(r.deviation.ad_mean),
                fmt_num(r.deviation.ad_max),
                (r.deviation.ad_empty as u8).to_string(),
                fmt_num(r.deviation.ql),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// VaR paths of one method on one window: `var[instrument][day]`, or `None`
/// where the instrument was skipped.
struct MethodPaths {
    var: Vec<Option<Vec<f64>>>,
    failures: Vec<FitFailure>,
}

fn method_index(m: VarMethod) -> u64 {
    VarMethod::ALL.iter().position(|x| *x == m).unwrap_or(0) as u64
}

fn constant_paths(values: &[f64], days: usize) -> Vec<Option<Vec<f64>>> {
    values.iter().map(|v| Some(vec![*v; days])).collect()
}

fn skipped(p: usize, window: usize, method: VarMethod, err: &NecoError) -> MethodPaths {
    MethodPaths {
        var: vec![None; p],
        failures: vec![FitFailure {
            window,
            method,
            instrument: None,
            message: err.to_string(),
            fallback: false,
        }],
    }
}

fn neco_paths(panel: &ReturnPanel, window: &Window, cfg: &BacktestConfig) -> Result<Vec<Vec<f64>>> {
    let lags = cfg.neco_lags;
    if window.test.start < lags {
        return Err(NecoError::WindowError(format!(
            "first test day {} has fewer than {lags} rows of history",
            window.test.start
        )));
    }
    let train = panel.slice_rows(window.train.clone())?;
    let (latent, marginals) = to_latent(&train)?;
    let graph = discover(latent.values(), latent.instruments().to_vec(), &cfg.ci)?;
    let ensemble = fit_sem(&latent, &graph, lags)?;
    let forecaster = NecoForecaster::new(&ensemble, marginals.clone(), cfg.alpha, cfg.covariance_mode)?;

    let p = panel.n_instruments();
    let values = panel.values();
    let mut out = vec![Vec::with_capacity(window.test.len()); p];
    for t in window.test.clone() {
        let mut history = DMatrix::zeros(lags, p);
        for (r, src) in (t - lags..t).enumerate() {
            let row: Vec<f64> = values.row(src).iter().copied().collect();
            for (j, z) in latent_row(&marginals, &row).into_iter().enumerate() {
                history[(r, j)] = z;
            }
        }
        let f = forecaster.forecast(&history)?;
        for (j, v) in f.values.into_iter().enumerate() {
            out[j].push(v);
        }
    }
    Ok(out)
}

/// Volatility forecasts for each test day, running the fitted recursion
/// over realized returns.
fn sigma_path(fit: &GarchFit, returns: &[f64], window: &Window) -> Vec<f64> {
    let mut sigma = fit.sigma_next;
    let mut out = Vec::with_capacity(window.test.len());
    for t in window.test.clone() {
        if t > window.test.start {
            sigma = fit.step(sigma, returns[t - 1]);
        }
        out.push(sigma);
    }
    out
}

fn garch_family_paths(
    panel: &ReturnPanel,
    window_index: usize,
    window: &Window,
    method: VarMethod,
    fits: &[std::result::Result<GarchFit, String>],
    cfg: &BacktestConfig,
    seed: u64,
) -> MethodPaths {
    let p = panel.n_instruments();
    let z = z_alpha(cfg.alpha);
    let results: Vec<(Option<Vec<f64>>, Option<FitFailure>)> = (0..p)
        .into_par_iter()
        .map(|j| {
            let col = panel.column(j);
            let train = &col[window.train.clone()];
            let cell_seed = derive_seed(seed, &[window_index as u64, method_index(method), j as u64]);
            let scored = fits[j].clone().and_then(|fit| {
                let q = match method {
                    VarMethod::Garch => mc_normal_quantile(cfg.alpha, cfg.mc_paths, cell_seed),
                    _ => fhs_standardized_quantile(train, &fit, cfg.alpha, cfg.boot_reps, cell_seed),
                }
                .map_err(|e| e.to_string())?;
                Ok(sigma_path(&fit, &col, window).into_iter().map(|s| fit.mu + s * q).collect())
            });
            match scored {
                Ok(path) => (Some(path), None),
                Err(message) => {
                    // variance-covariance fallback on the training slice
                    let m = mean(train);
                    let s = sample_std(train);
                    let fallback = s > 0.0;
                    let failure = FitFailure {
                        window: window_index,
                        method,
                        instrument: Some(j),
                        message,
                        fallback,
                    };
                    let path = fallback.then(|| vec![m - z * s; window.test.len()]);
                    (path, Some(failure))
                }
            }
        })
        .collect();
    let mut paths = MethodPaths {
        var: Vec::with_capacity(p),
        failures: Vec::new(),
    };
    for (path, failure) in results {
        paths.var.push(path);
        paths.failures.extend(failure);
    }
    paths
}

struct WindowResult {
    cells: Vec<CellReport>,
    failures: Vec<FitFailure>,
    days: Vec<DayRecord>,
}

fn run_window(
    panel: &ReturnPanel,
    window_index: usize,
    window: &Window,
    cfg: &BacktestConfig,
    seed: u64,
) -> Result<WindowResult> {
    let p = panel.n_instruments();
    let days = window.test.len();
    let needs_garch = cfg.methods.iter().any(|m| matches!(m, VarMethod::Garch | VarMethod::Fhs));
    let garch_fits: Vec<std::result::Result<GarchFit, String>> = if needs_garch {
        (0..p)
            .into_par_iter()
            .map(|j| fit_garch11(&panel.column(j)[window.train.clone()], None).map_err(|e| e.to_string()))
            .collect()
    } else {
        Vec::new()
    };
    let train = panel.slice_rows(window.train.clone())?;

    let mut result = WindowResult {
        cells: Vec::new(),
        failures: Vec::new(),
        days: Vec::new(),
    };
    for &method in &cfg.methods {
        let paths = match method {
            VarMethod::Neco => match neco_paths(panel, window, cfg) {
                Ok(v) => MethodPaths {
                    var: v.into_iter().map(Some).collect(),
                    failures: Vec::new(),
                },
                Err(e) => skipped(p, window_index, method, &e),
            },
            VarMethod::VarCovar => match varcovar_var(&train, cfg.alpha) {
                Ok(f) => MethodPaths {
                    var: constant_paths(&f.values, days),
                    failures: Vec::new(),
                },
                Err(e) => skipped(p, window_index, method, &e),
            },
            VarMethod::Hist => {
                let s = derive_seed(seed, &[window_index as u64, method_index(method)]);
                match hist_var(&train, cfg.alpha, cfg.boot_reps, s) {
                    Ok(f) => MethodPaths {
                        var: constant_paths(&f.values, days),
                        failures: Vec::new(),
                    },
                    Err(e) => skipped(p, window_index, method, &e),
                }
            }
            VarMethod::Garch | VarMethod::Fhs => {
                garch_family_paths(panel, window_index, window, method, &garch_fits, cfg, seed)
            }
        };
        result.failures.extend(paths.failures);
        for (j, path) in paths.var.into_iter().enumerate() {
            let Some(var) = path else { continue };
            let returns: Vec<f64> = window.test.clone().map(|t| panel.values()[(t, j)]).collect();
            let report = evaluate(&returns, &var, cfg.alpha, cfg.dq_lags)?;
            for (k, t) in window.test.clone().enumerate() {
                result.days.push(DayRecord {
                    window: window_index,
                    method,
                    row: t,
                    instrument: j,
                    var: var[k],
                    ret: returns[k],
                    hit: returns[k] <= var[k],
                });
            }
            result.cells.push(CellReport {
                window: window_index,
                method,
                instrument: j,
                report,
            });
        }
    }
    Ok(result)
}

/// Fits every method on each training slice, forecasts each test day one
/// step ahead from realized history and scores the forecasts per
/// (window, method, instrument). Fit failures are recorded and only the
/// affected cells are skipped.
pub fn rolling_backtest(
    panel: &ReturnPanel,
    plan: &WindowPlan,
    cfg: &BacktestConfig,
    seed: u64,
) -> Result<BacktestOutput> {
    cfg.validate()?;
    if let Some(w) = plan.windows.last() {
        if w.test.end > panel.n_obs() {
            return Err(NecoError::WindowError(format!(
                "window plan reaches row {} but the panel has {} rows",
                w.test.end,
                panel.n_obs()
            )));
        }
    }
    let per_window: Vec<WindowResult> = plan
        .windows
        .par_iter()
        .enumerate()
        .map(|(i, w)| run_window(panel, i, w, cfg, seed))
        .collect::<Result<_>>()?;
    let mut out = BacktestOutput {
        alpha: cfg.alpha,
        instruments: panel.instruments().to_vec(),
        methods: cfg.methods.clone(),
        cells: Vec::new(),
        failures: Vec::new(),
        days: Vec::new(),
    };
    for w in per_window {
        out.cells.extend(w.cells);
        out.failures.extend(w.failures);
        out.days.extend(w.days);
    }
    Ok(out)
}

/// Summary of one method over all scored cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateStats {
    pub label: String,
    pub n_cells: usize,
    pub mean_alpha_hat: f64,
    pub sd_alpha_hat: f64,
    pub lruc_accept: f64,
    pub lrcc_accept: f64,
    pub dq_accept: f64,
    pub ae_mean: f64,
    pub ae_sd: f64,
    /// Mean absolute deviation over all violation days; NaN without violations.
    pub ad_mean: f64,
    pub ad_max: f64,
    pub mean_ql: f64,
    /// Mean QL relative to the reference method.
    pub compare_ql: f64,
}

fn sd_or_zero(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        0.0
    } else {
        sample_std(xs)
    }
}

impl AggregateStats {
    pub fn from_reports<'a>(label: &str, reports: impl IntoIterator<Item = &'a BacktestReport>) -> Self {
        let reports: Vec<&BacktestReport> = reports.into_iter().collect();
        let n = reports.len();
        let rate = |f: &dyn Fn(&BacktestReport) -> bool| {
            if n == 0 {
                f64::NAN
            } else {
                reports.iter().filter(|r| f(r)).count() as f64 / n as f64
            }
        };
        let alpha_hat: Vec<f64> = reports.iter().map(|r| r.alpha_hat).collect();
        let ae: Vec<f64> = reports.iter().map(|r| r.ae).collect();
        let n_viol: usize = reports.iter().map(|r| r.n1).sum();
        let ad_sum: f64 = reports.iter().map(|r| r.deviation.ad_mean * r.n1 as f64).sum();
        let ad_max = reports
            .iter()
            .filter(|r| !r.deviation.ad_empty)
            .map(|r| r.deviation.ad_max)
            .fold(f64::NAN, f64::max);
        let avg = |xs: &[f64]| if xs.is_empty() { f64::NAN } else { mean(xs) };
        let ql: Vec<f64> = reports.iter().map(|r| r.deviation.ql).collect();
        Self {
            label: label.to_string(),
            n_cells: n,
            mean_alpha_hat: avg(&alpha_hat),
            sd_alpha_hat: sd_or_zero(&alpha_hat),
            lruc_accept: rate(&|r| r.lr_uc.accept),
            lrcc_accept: rate(&|r| r.lr_cc.accept),
            dq_accept: rate(&|r| r.dq.accept),
            ae_mean: avg(&ae),
            ae_sd: sd_or_zero(&ae),
            ad_mean: if n_viol > 0 { ad_sum / n_viol as f64 } else { f64::NAN },
            ad_max,
            mean_ql: avg(&ql),
            compare_ql: f64::NAN,
        }
    }
}

/// Method-by-metric comparison table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub reference: String,
    pub columns: Vec<String>,
    pub stats: Vec<AggregateStats>,
}

pub const TABLE_ROWS: [&str; 10] = [
    "mean(alpha_hat)",
    "sd(alpha_hat)",
    "LRuc.accept",
    "LRcc.accept",
    "DQ.accept",
    "AE.mean",
    "AE.sd",
    "AD.mean",
    "AD.max",
    "CompareQL",
];

fn fmt_cell(x: f64) -> String {
    if x.is_nan() {
        "NA".into()
    } else {
        format!("{x:.6}")
    }
}

impl ComparisonTable {
    /// Builds a table from labelled columns, normalizing QL by the column
    /// at `reference`.
    pub fn new(columns: Vec<String>, mut stats: Vec<AggregateStats>, reference: usize) -> Self {
        let base = stats.get(reference).map(|s| s.mean_ql).unwrap_or(f64::NAN);
        for s in &mut stats {
            s.compare_ql = s.mean_ql / base;
        }
        Self {
            reference: columns.get(reference).cloned().unwrap_or_default(),
            columns,
            stats,
        }
    }

    pub fn row_values(&self, row: usize) -> Vec<f64> {
        self.stats
            .iter()
            .map(|s| match row {
                0 => s.mean_alpha_hat,
                1 => s.sd_alpha_hat,
                2 => s.lruc_accept,
                3 => s.lrcc_accept,
                4 => s.dq_accept,
                5 => s.ae_mean,
                6 => s.ae_sd,
                7 => s.ad_mean,
                8 => s.ad_max,
                _ => s.compare_ql,
            })
            .collect()
    }

    pub fn column(&self, name: &str) -> Option<&AggregateStats> {
        self.columns.iter().position(|c| c == name).map(|i| &self.stats[i])
    }

    /// Rows are metrics, columns are methods (or sweep levels).
    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["metric".to_string()];
        header.extend(self.columns.iter().cloned());
        w.write_record(&header)?;
        for (i, name) in TABLE_ROWS.iter().enumerate() {
            let mut rec = vec![name.to_string()];
            rec.extend(self.row_values(i).into_iter().map(fmt_cell));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        let mut rows = BTreeMap::new();
        for (i, name) in TABLE_ROWS.iter().enumerate() {
            let vals: BTreeMap<&str, Option<f64>> = self
                .columns
                .iter()
                .map(String::as_str)
                .zip(self.row_values(i).into_iter().map(|v| v.is_finite().then_some(v)))
                .collect();
            rows.insert(*name, vals);
        }
        let doc = serde_json::json!({
            "reference": self.reference,
            "columns": self.columns,
            "rows": rows,
            "n_cells": self.stats.iter().map(|s| s.n_cells).collect::<Vec<_>>(),
        });
        Ok(serde_json::to_string_pretty(&doc)?)
    }
}

/// Table-2-shaped summary of a backtest run.
pub fn aggregate(output: &BacktestOutput) -> ComparisonTable {
    let stats: Vec<AggregateStats> = output
        .methods
        .iter()
        .map(|&m| {
            AggregateStats::from_reports(
                m.display_name(),
                output.cells.iter().filter(|c| c.method == m).map(|c| &c.report),
            )
        })
        .collect();
    let reference = output
        .methods
        .iter()
        .position(|m| *m == VarMethod::Neco)
        .unwrap_or(0);
    let columns = output.methods.iter().map(|m| m.display_name().to_string()).collect();
    ComparisonTable::new(columns, stats, reference)
}
