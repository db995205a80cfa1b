//! Replicated simulation studies: baseline comparison and the window, size,
//! contagion and volatility sweeps, plus timing and lag selection.

use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::backtest::{rolling_backtest, AggregateStats, BacktestConfig, BacktestReport, ComparisonTable};
use crate::copula::to_latent;
use crate::discovery::discover;
use crate::engines::{check_alpha, VarMethod};
use crate::error::{NecoError, Result};
use crate::graph::CausalGraph;
use crate::panel::{fmt_num, make_windows};
use crate::rng::{derive_seed, rng_from};
use crate::sem::{fit_sem, select_lags, SemModel};
use crate::simulation::{
    benchmark_network, calibrate_contagion, draw_coefficients, random_dag, simulate_sem, with_own_lags,
    Noise, SimConfig,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StudyKind {
    Baseline,
    Window,
    Size,
    Contagion,
    Volatility,
}

impl StudyKind {
    pub const ALL: [StudyKind; 5] = [
        StudyKind::Baseline,
        StudyKind::Window,
        StudyKind::Size,
        StudyKind::Contagion,
        StudyKind::Volatility,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StudyKind::Baseline => "baseline",
            StudyKind::Window => "window",
            StudyKind::Size => "size",
            StudyKind::Contagion => "contagion",
            StudyKind::Volatility => "volatility",
        }
    }

    /// Sweep levels used when none are given.
    pub fn default_levels(self) -> Vec<f64> {
        match self {
            StudyKind::Baseline => vec![0.0],
            StudyKind::Window => vec![50.0, 100.0, 150.0, 200.0, 250.0, 300.0, 350.0, 400.0, 450.0, 500.0],
            StudyKind::Size => vec![5.0, 10.0, 20.0, 50.0],
            StudyKind::Contagion => vec![0.0, 0.19, 0.47, 0.73, 0.83],
            StudyKind::Volatility => vec![0.005, 0.05, 0.5, 1.0, 2.0],
        }
    }
}

impl std::str::FromStr for StudyKind {
    type Err = NecoError;

    fn from_str(s: &str) -> Result<Self> {
        StudyKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| NecoError::InvalidConfig(format!("unknown study '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StudyConfig {
    pub reps: usize,
    pub train: usize,
    pub test: usize,
    /// Levels at which per-replication α̂ traces are recorded.
    pub alphas: Vec<f64>,
    /// Level reported in the summary table.
    pub table_alpha: f64,
    pub noise: Noise,
    pub sigma: f64,
    pub shock_period: Option<usize>,
    pub shock_scale: f64,
    pub target_necof: f64,
    /// Instruments for the contagion sweep.
    pub contagion_p: usize,
    pub lags: usize,
    pub ar_scale: f64,
    pub levels: Option<Vec<f64>>,
    /// Methods for the baseline comparison; sweeps score Causal-NECO only.
    pub methods: Vec<VarMethod>,
    pub backtest: BacktestConfig,
    pub seed: u64,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            reps: 20,
            train: 250,
            test: 100,
            alphas: vec![0.01, 0.05, 0.10],
            table_alpha: 0.05,
            noise: Noise::Exponential,
            sigma: 0.01,
            shock_period: Some(100),
            shock_scale: 5.0,
            target_necof: 0.47,
            contagion_p: 10,
            lags: 1,
            ar_scale: 0.2,
            levels: None,
            methods: VarMethod::ALL.to_vec(),
            backtest: BacktestConfig::default(),
            seed: 20_240_101,
        }
    }
}

impl StudyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.reps == 0 || self.test == 0 || self.train == 0 {
            return Err(NecoError::InvalidConfig("reps, train and test must be positive".into()));
        }
        for &a in self.alphas.iter().chain([&self.table_alpha]) {
            check_alpha(a)?;
        }
        if self.methods.is_empty() {
            return Err(NecoError::InvalidConfig("no methods selected".into()));
        }
        if !(0.0..1.0).contains(&self.target_necof) {
            return Err(NecoError::InvalidConfig(format!(
                "target NECOF must lie in [0, 1), got {}",
                self.target_necof
            )));
        }
        Ok(())
    }

    fn alphas_with_table(&self) -> Vec<f64> {
        let mut a = self.alphas.clone();
        if !a.iter().any(|x| (x - self.table_alpha).abs() < 1e-12) {
            a.push(self.table_alpha);
        }
        a
    }
}

/// Density giving the benchmark network's mean degree (2.8) at size `p`.
pub(crate) fn sparse_density(p: usize) -> f64 {
    if p < 2 {
        0.0
    } else {
        (2.8 / (p as f64 - 1.0)).min(1.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub level: String,
    pub rep: usize,
    pub alpha: f64,
    pub method: VarMethod,
    pub instrument: String,
    pub alpha_hat: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyOutput {
    pub name: String,
    pub table: ComparisonTable,
    pub trace: Vec<TraceRow>,
    /// Skipped (method, window) cells across all replications.
    pub skipped_cells: usize,
    /// Cells scored with the variance-covariance fallback.
    pub fallback_cells: usize,
}

impl StudyOutput {
    /// Mean α̂ of a table column at the table level.
    pub fn mean_alpha_hat(&self, column: &str) -> Option<f64> {
        self.table.column(column).map(|s| s.mean_alpha_hat)
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let table = std::fs::File::create(dir.join(format!("study_{}_table.csv", self.name)))?;
        self.table.write_csv(table)?;
        std::fs::write(dir.join(format!("study_{}_table.json", self.name)), self.table.to_json()?)?;
        let trace = std::fs::File::create(dir.join(format!("study_{}_trace.csv", self.name)))?;
        let mut w = csv::Writer::from_writer(trace);
        w.write_record(["level", "rep", "alpha", "method", "instrument", "alpha_hat"])?;
        for r in &self.trace {
            w.write_record([
                r.level.clone(),
                r.rep.to_string(),
                fmt_num(r.alpha),
                r.method.tag().to_string(),
                r.instrument.clone(),
                fmt_num(r.alpha_hat),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn level_label(kind: StudyKind, level: f64) -> String {
    match kind {
        StudyKind::Baseline => "baseline".into(),
        StudyKind::Window => format!("N={}", level as usize),
        StudyKind::Size => format!("p={}", level as usize),
        StudyKind::Contagion => format!("NECOF={}%", (level * 100.0).round()),
        StudyKind::Volatility => format!("sd={level}"),
    }
}

/// Benchmark network with coefficients and own lags drawn once from `seed`.
fn benchmark_model(cfg: &StudyConfig, sigma: f64, seed: u64) -> Result<SemModel> {
    let g = benchmark_network();
    let mut rng = rng_from(seed);
    let base = draw_coefficients(&g, &mut rng);
    let m = calibrate_contagion(&g, &base, cfg.target_necof, sigma)?;
    with_own_lags(&m, cfg.lags, cfg.ar_scale, &mut rng)
}

/// Random sparse network calibrated to `target`, redrawn while the target
/// is unreachable (an empty graph cannot carry contagion).
fn random_model(cfg: &StudyConfig, p: usize, target: f64, seed: u64) -> Result<SemModel> {
    let mut last_err = None;
    for attempt in 0..100u64 {
        let s = derive_seed(seed, &[attempt]);
        let g: CausalGraph = random_dag(p, sparse_density(p), s)?;
        let mut rng = rng_from(derive_seed(s, &[1]));
        let base = draw_coefficients(&g, &mut rng);
        match calibrate_contagion(&g, &base, target, cfg.sigma) {
            Ok(m) => return with_own_lags(&m, cfg.lags, cfg.ar_scale, &mut rng),
            Err(e @ NecoError::CalibrationError { .. }) => last_err = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(last_err.unwrap_or_else(|| NecoError::InvalidConfig("calibration failed".into())))
}

struct RepResult {
    level: usize,
    rep: usize,
    /// (alpha, method, instrument, report)
    reports: Vec<(f64, VarMethod, usize, BacktestReport)>,
    instruments: Vec<String>,
    skipped: usize,
    fallbacks: usize,
}

fn run_rep(kind: StudyKind, cfg: &StudyConfig, level_idx: usize, level: f64, rep: usize) -> Result<RepResult> {
    let model_seed = derive_seed(cfg.seed, &[level_idx as u64, rep as u64, 0]);
    let sim_seed = derive_seed(cfg.seed, &[level_idx as u64, rep as u64, 1]);
    let bt_seed = derive_seed(cfg.seed, &[level_idx as u64, rep as u64, 2]);
    // fixed-network studies share one coefficient draw across replications
    let fixed_seed = derive_seed(cfg.seed, &[u64::MAX]);

    let mut train = cfg.train;
    let mut sigma = cfg.sigma;
    let model = match kind {
        StudyKind::Baseline => benchmark_model(cfg, sigma, fixed_seed)?,
        StudyKind::Window => {
            train = level as usize;
            benchmark_model(cfg, sigma, fixed_seed)?
        }
        StudyKind::Volatility => {
            sigma = level;
            benchmark_model(cfg, sigma, fixed_seed)?
        }
        StudyKind::Size => random_model(cfg, level as usize, cfg.target_necof, model_seed)?,
        StudyKind::Contagion => random_model(cfg, cfg.contagion_p, level, model_seed)?,
    };
    let sim = SimConfig {
        p: model.p(),
        lags: cfg.lags,
        noise: cfg.noise,
        sigma,
        shock_period: cfg.shock_period,
        shock_scale: cfg.shock_scale,
        n: train + cfg.test,
        seed: sim_seed,
        ..SimConfig::default()
    };
    let panel = simulate_sem(&model, &sim)?;
    let plan = make_windows(panel.n_obs(), train, cfg.test, cfg.test)?;
    let methods = match kind {
        StudyKind::Baseline => cfg.methods.clone(),
        _ => vec![VarMethod::Neco],
    };
    let mut out = RepResult {
        level: level_idx,
        rep,
        reports: Vec::new(),
        instruments: panel.instruments().to_vec(),
        skipped: 0,
        fallbacks: 0,
    };
    for alpha in cfg.alphas_with_table() {
        let bt = BacktestConfig {
            alpha,
            methods: methods.clone(),
            ..cfg.backtest.clone()
        };
        let res = rolling_backtest(&panel, &plan, &bt, bt_seed)?;
        out.skipped += res.failures.iter().filter(|f| !f.fallback).count();
        out.fallbacks += res.failures.iter().filter(|f| f.fallback).count();
        out.reports
            .extend(res.cells.into_iter().map(|c| (alpha, c.method, c.instrument, c.report)));
    }
    Ok(out)
}

/// Runs a replicated study and summarizes it at `table_alpha`. The baseline
/// table has one column per method; sweep tables have one Causal-NECO column
/// per level, with QL relative to the reference level.
pub fn run_study(kind: StudyKind, cfg: &StudyConfig) -> Result<StudyOutput> {
    cfg.validate()?;
    let levels = cfg.levels.clone().unwrap_or_else(|| kind.default_levels());
    if levels.is_empty() {
        return Err(NecoError::InvalidConfig("study needs at least one level".into()));
    }
    let jobs: Vec<(usize, f64, usize)> = levels
        .iter()
        .enumerate()
        .flat_map(|(i, &l)| (0..cfg.reps).map(move |r| (i, l, r)))
        .collect();
    let results: Vec<RepResult> = jobs
        .par_iter()
        .map(|&(i, l, r)| run_rep(kind, cfg, i, l, r))
        .collect::<Result<_>>()?;

    let is_table = |a: f64| (a - cfg.table_alpha).abs() < 1e-12;
    let mut trace = Vec::new();
    for r in &results {
        for (alpha, method, j, rep) in &r.reports {
            trace.push(TraceRow {
                level: level_label(kind, levels[r.level]),
                rep: r.rep,
                alpha: *alpha,
                method: *method,
                instrument: r.instruments[*j].clone(),
                alpha_hat: rep.alpha_hat,
            });
        }
    }

    let table = if kind == StudyKind::Baseline {
        let stats = cfg
            .methods
            .iter()
            .map(|&m| {
                AggregateStats::from_reports(
                    m.display_name(),
                    results
                        .iter()
                        .flat_map(|r| r.reports.iter())
                        .filter(|(a, mm, _, _)| is_table(*a) && *mm == m)
                        .map(|(_, _, _, rep)| rep),
                )
            })
            .collect();
        let reference = cfg.methods.iter().position(|m| *m == VarMethod::Neco).unwrap_or(0);
        let columns = cfg.methods.iter().map(|m| m.display_name().to_string()).collect();
        ComparisonTable::new(columns, stats, reference)
    } else {
        let stats = (0..levels.len())
            .map(|li| {
                AggregateStats::from_reports(
                    &level_label(kind, levels[li]),
                    results
                        .iter()
                        .filter(|r| r.level == li)
                        .flat_map(|r| r.reports.iter())
                        .filter(|(a, _, _, _)| is_table(*a))
                        .map(|(_, _, _, rep)| rep),
                )
            })
            .collect();
        let reference_level = match kind {
            StudyKind::Window => 250.0,
            StudyKind::Size => 5.0,
            StudyKind::Contagion => 0.47,
            StudyKind::Volatility => 0.5,
            StudyKind::Baseline => 0.0,
        };
        let reference = levels
            .iter()
            .position(|l| (l - reference_level).abs() < 1e-12)
            .unwrap_or(0);
        let columns = levels.iter().map(|&l| level_label(kind, l)).collect();
        ComparisonTable::new(columns, stats, reference)
    };
    Ok(StudyOutput {
        name: kind.name().to_string(),
        table,
        trace,
        skipped_cells: results.iter().map(|r| r.skipped).sum(),
        fallback_cells: results.iter().map(|r| r.fallbacks).sum(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub p: usize,
    pub reps: usize,
    pub mean_ms: f64,
}

/// Mean wall-clock milliseconds of discovery plus SEM fitting on sparse
/// networks of each size (N = 250, Gaussian noise).
pub fn timing_study(p_values: &[usize], reps: usize, seed: u64) -> Result<Vec<TimingRow>> {
    let cfg = StudyConfig {
        noise: Noise::Gaussian,
        shock_period: None,
        ..StudyConfig::default()
    };
    let mut rows = Vec::with_capacity(p_values.len());
    for (pi, &p) in p_values.iter().enumerate() {
        let mut total = 0.0;
        for rep in 0..reps {
            let s = derive_seed(seed, &[pi as u64, rep as u64]);
            let model = random_model(&cfg, p, cfg.target_necof, s)?;
            let sim = SimConfig {
                p,
                noise: Noise::Gaussian,
                n: 250,
                seed: derive_seed(s, &[7]),
                ..SimConfig::default()
            };
            let panel = simulate_sem(&model, &sim)?;
            let (latent, _) = to_latent(&panel)?;
            let start = Instant::now();
            let graph = discover(latent.values(), latent.instruments().to_vec(), &cfg.backtest.ci)?;
            fit_sem(&latent, &graph, cfg.lags)?;
            total += start.elapsed().as_secs_f64() * 1e3;
        }
        rows.push(TimingRow {
            p,
            reps,
            mean_ms: if reps > 0 { total / reps as f64 } else { 0.0 },
        });
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LagAicRow {
    pub lags: usize,
    pub k: usize,
    pub loglik: f64,
    pub aic: f64,
    pub selected: bool,
}

/// Simulates a first-order panel with own-lag coefficients uniform in
/// ±`ar_scale`, maps it to latent scores, discovers the network and scores
/// lags 0..=max_lags by AIC.
pub fn lag_aic_study(p: usize, n: usize, max_lags: usize, ar_scale: f64, seed: u64) -> Result<Vec<LagAicRow>> {
    let sim = SimConfig {
        p,
        density: sparse_density(p),
        target_necof: Some(0.47),
        lags: 1,
        ar_scale,
        noise: Noise::Gaussian,
        n,
        seed,
        ..SimConfig::default()
    };
    let model = crate::simulation::model_from_config(&sim, None)?;
    let panel = simulate_sem(&model, &sim)?;
    let (latent, _) = to_latent(&panel)?;
    let graph = discover(latent.values(), latent.instruments().to_vec(), &Default::default())?;
    let sel = select_lags(&latent, &graph, max_lags)?;
    Ok(sel
        .candidates
        .iter()
        .map(|c| LagAicRow {
            lags: c.lags,
            k: c.k,
            loglik: c.loglik,
            aic: c.aic,
            selected: c.lags == sel.chosen_lags,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sparse_density_matches_benchmark() {
        assert!((sparse_density(5) - 0.7).abs() < 1e-12);
        assert_eq!(sparse_density(1), 0.0);
        assert_eq!(sparse_density(2), 1.0);
    }

    #[test]
    fn study_names_parse() {
        for k in StudyKind::ALL {
            assert_eq!(k.name().parse::<StudyKind>().unwrap(), k);
        }
        assert!("timing2".parse::<StudyKind>().is_err());
    }

    #[test]
    fn small_contagion_study_runs() {
        let cfg = StudyConfig {
            reps: 2,
            alphas: vec![0.05],
            levels: Some(vec![0.0, 0.47]),
            contagion_p: 4,
            backtest: BacktestConfig {
                boot_reps: 10,
                mc_paths: 500,
                ..Default::default()
            },
            ..Default::default()
        };
        let out = run_study(StudyKind::Contagion, &cfg).unwrap();
        assert_eq!(out.table.columns, vec!["NECOF=0%", "NECOF=47%"]);
        assert_eq!(out.table.stats[1].compare_ql, 1.0);
        assert_eq!(out.trace.len(), 2 * 2 * 4);
    }

    #[test]
    fn lag_table_flags_one_minimum() {
        let rows = lag_aic_study(4, 600, 3, 0.5, 8).unwrap();
        assert_eq!(rows.len(), 4);
        assert_eq!(rows.iter().filter(|r| r.selected).count(), 1);
        let best = rows.iter().min_by(|a, b| a.aic.total_cmp(&b.aic)).unwrap();
        assert!(best.selected);
    }
}
