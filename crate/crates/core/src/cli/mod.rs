//! Command-line front end.
//!
//! Every command accepts its flags from the command line or from a section
//! of the TOML file given with `--config` (`[simulate]`, `[backtest]`, ...),
//! with command-line values winning. The merged settings are written to
//! `manifest.json` next to the outputs.

mod commands;

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::error::NecoError;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_PARTIAL: i32 = 3;
pub const EXIT_DATA: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "causal-neco", version, about = "Causal network contagion Value-at-Risk")]
pub struct Cli {
    /// TOML file with one table per command.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a contagion network and its return panel.
    Simulate(SimulateArgs),
    /// Estimate the contagion CPDAG of a panel.
    Discover(DiscoverArgs),
    /// Fit the structural model (and optionally select lags by AIC).
    Fit(FitArgs),
    /// One-step-ahead VaR after the last row of a panel.
    Forecast(ForecastArgs),
    /// Rolling-window backtest of VaR engines.
    Backtest(BacktestArgs),
    /// Score an external forecasts CSV against realized returns.
    Compare(CompareArgs),
    /// Re-run a simulation study.
    Reproduce(ReproduceArgs),
}

impl Command {
    fn section(&self) -> &'static str {
        match self {
            Command::Simulate(_) => "simulate",
            Command::Discover(_) => "discover",
            Command::Fit(_) => "fit",
            Command::Forecast(_) => "forecast",
            Command::Backtest(_) => "backtest",
            Command::Compare(_) => "compare",
            Command::Reproduce(_) => "reproduce",
        }
    }
}

/// Merges `file` values into unset fields of `self`.
pub(crate) trait Merge {
    fn merge(self, file: Self) -> Self;
}

macro_rules! mergeable {
    ($name:ident { $($field:ident),* $(,)? }) => {
        impl Merge for $name {
            fn merge(self, file: Self) -> Self {
                Self { $($field: self.$field.or(file.$field)),* }
            }
        }
    };
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct SimulateArgs {
    /// Output directory (created if missing).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub p: Option<usize>,
    /// Edge probability per forward pair.
    #[arg(long)]
    pub density: Option<f64>,
    /// Exact number of edges.
    #[arg(long)]
    pub edges: Option<usize>,
    /// Target market NECOF in [0, 1).
    #[arg(long)]
    pub necof: Option<f64>,
    #[arg(long)]
    pub n: Option<usize>,
    /// gaussian or exponential.
    #[arg(long)]
    pub noise: Option<String>,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long = "shock-every")]
    pub shock_every: Option<usize>,
    #[arg(long = "shock-scale")]
    pub shock_scale: Option<f64>,
    #[arg(long)]
    pub lags: Option<usize>,
    #[arg(long = "ar-scale")]
    pub ar_scale: Option<f64>,
    #[arg(long = "burn-in")]
    pub burn_in: Option<usize>,
    /// Use the five-instrument benchmark network instead of a random DAG.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub benchmark: Option<bool>,
    #[arg(long)]
    pub seed: Option<u64>,
}
mergeable!(SimulateArgs {
    out, p, density, edges, necof, n, noise, sigma, shock_every, shock_scale, lags, ar_scale, burn_in,
    benchmark, seed
});

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct PanelArgs {
    /// Panel CSV with header `date,<label>,...`.
    #[arg(long)]
    pub panel: Option<PathBuf>,
    /// The panel holds prices; convert to log-returns.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub prices: Option<bool>,
}
mergeable!(PanelArgs { panel, prices });

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct DiscoveryArgs {
    /// Significance level of the conditional-independence tests.
    #[arg(long = "alpha-ci")]
    pub alpha_ci: Option<f64>,
    /// Largest conditioning set.
    #[arg(long = "max-cond")]
    pub max_cond: Option<usize>,
}
mergeable!(DiscoveryArgs { alpha_ci, max_cond });

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct DiscoverArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub panel: PanelArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub discovery: DiscoveryArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl Merge for DiscoverArgs {
    fn merge(self, file: Self) -> Self {
        Self {
            panel: self.panel.merge(file.panel),
            discovery: self.discovery.merge(file.discovery),
            out: self.out.or(file.out),
        }
    }
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct FitArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub panel: PanelArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub discovery: DiscoveryArgs,
    /// Graph JSON to fit instead of discovering one.
    #[arg(long)]
    pub graph: Option<PathBuf>,
    #[arg(long)]
    pub lags: Option<usize>,
    /// Select the lag order in 0..=max-lags by AIC.
    #[arg(long = "max-lags")]
    pub max_lags: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl Merge for FitArgs {
    fn merge(self, file: Self) -> Self {
        Self {
            panel: self.panel.merge(file.panel),
            discovery: self.discovery.merge(file.discovery),
            graph: self.graph.or(file.graph),
            lags: self.lags.or(file.lags),
            max_lags: self.max_lags.or(file.max_lags),
            out: self.out.or(file.out),
        }
    }
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct EngineArgs {
    /// Comma-separated subset of neco,varcovar,hist,garch,fhs.
    #[arg(long, value_delimiter = ',')]
    pub methods: Option<Vec<String>>,
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Own-lag order of the NECO model.
    #[arg(long)]
    pub lags: Option<usize>,
    #[arg(long = "boot-reps")]
    pub boot_reps: Option<usize>,
    #[arg(long = "mc-paths")]
    pub mc_paths: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}
mergeable!(EngineArgs { methods, alpha, lags, boot_reps, mc_paths, seed });

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct ForecastArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub panel: PanelArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub discovery: DiscoveryArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub engine: EngineArgs,
    /// Use only the last `train` rows (default: all).
    #[arg(long)]
    pub train: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl Merge for ForecastArgs {
    fn merge(self, file: Self) -> Self {
        Self {
            panel: self.panel.merge(file.panel),
            discovery: self.discovery.merge(file.discovery),
            engine: self.engine.merge(file.engine),
            train: self.train.or(file.train),
            out: self.out.or(file.out),
        }
    }
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct BacktestArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub panel: PanelArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub discovery: DiscoveryArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub engine: EngineArgs,
    #[arg(long)]
    pub train: Option<usize>,
    #[arg(long)]
    pub test: Option<usize>,
    /// Rows between window starts (default: the test length).
    #[arg(long)]
    pub stride: Option<usize>,
    #[arg(long = "dq-lags")]
    pub dq_lags: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl Merge for BacktestArgs {
    fn merge(self, file: Self) -> Self {
        Self {
            panel: self.panel.merge(file.panel),
            discovery: self.discovery.merge(file.discovery),
            engine: self.engine.merge(file.engine),
            train: self.train.or(file.train),
            test: self.test.or(file.test),
            stride: self.stride.or(file.stride),
            dq_lags: self.dq_lags.or(file.dq_lags),
            out: self.out.or(file.out),
        }
    }
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct CompareArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub panel: PanelArgs,
    /// Forecast CSV with columns time,instrument,method,alpha,var.
    #[arg(long)]
    pub forecasts: Option<PathBuf>,
    /// Only score rows at this level (default: the single level present).
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long = "dq-lags")]
    pub dq_lags: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl Merge for CompareArgs {
    fn merge(self, file: Self) -> Self {
        Self {
            panel: self.panel.merge(file.panel),
            forecasts: self.forecasts.or(file.forecasts),
            alpha: self.alpha.or(file.alpha),
            dq_lags: self.dq_lags.or(file.dq_lags),
            out: self.out.or(file.out),
        }
    }
}

pub const STUDY_NAMES: [&str; 7] = ["baseline", "window", "size", "contagion", "volatility", "timing", "lag-aic"];

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct ReproduceArgs {
    /// Study name.
    #[arg(value_parser = STUDY_NAMES)]
    #[serde(skip)]
    pub study: String,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Comma-separated sweep levels.
    #[arg(long, value_delimiter = ',')]
    pub levels: Option<Vec<f64>>,
    #[arg(long)]
    pub train: Option<usize>,
    #[arg(long)]
    pub test: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub alphas: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub methods: Option<Vec<String>>,
    #[arg(long = "boot-reps")]
    pub boot_reps: Option<usize>,
    #[arg(long = "mc-paths")]
    pub mc_paths: Option<usize>,
    /// Largest lag scored by the lag-aic study.
    #[arg(long)]
    pub lmax: Option<usize>,
    /// Instruments for the lag-aic study.
    #[arg(long)]
    pub p: Option<usize>,
    /// Rows for the lag-aic study.
    #[arg(long)]
    pub n: Option<usize>,
    /// Network sizes for the timing study.
    #[arg(long = "p-values", value_delimiter = ',')]
    pub p_values: Option<Vec<usize>>,
}

impl Merge for ReproduceArgs {
    fn merge(self, file: Self) -> Self {
        Self {
            study: self.study,
            out: self.out.or(file.out),
            reps: self.reps.or(file.reps),
            seed: self.seed.or(file.seed),
            levels: self.levels.or(file.levels),
            train: self.train.or(file.train),
            test: self.test.or(file.test),
            alphas: self.alphas.or(file.alphas),
            methods: self.methods.or(file.methods),
            boot_reps: self.boot_reps.or(file.boot_reps),
            mc_paths: self.mc_paths.or(file.mc_paths),
            lmax: self.lmax.or(file.lmax),
            p: self.p.or(file.p),
            n: self.n.or(file.n),
            p_values: self.p_values.or(file.p_values),
        }
    }
}

/// Failure of a CLI run, carrying its exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }
}

impl From<NecoError> for CliError {
    fn from(e: NecoError) -> Self {
        let code = match e {
            NecoError::InvalidConfig(_)
            | NecoError::InvalidInit(_)
            | NecoError::DomainError(_)
            | NecoError::WindowError(_)
            | NecoError::CalibrationError { .. } => EXIT_USAGE,
            _ => EXIT_DATA,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

pub(crate) type CliResult<T> = std::result::Result<T, CliError>;

fn load_section<T: for<'de> Deserialize<'de> + Default>(path: Option<&Path>, section: &str) -> CliResult<T> {
    let Some(path) = path else {
        return Ok(T::default());
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", path.display())))?;
    let table: toml::Table =
        toml::from_str(&text).map_err(|e| CliError::usage(format!("invalid config {}: {e}", path.display())))?;
    match table.get(section) {
        None => Ok(T::default()),
        Some(v) => v
            .clone()
            .try_into()
            .map_err(|e| CliError::usage(format!("invalid [{section}] section: {e}"))),
    }
}

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            eprintln!("error: --jobs must be positive");
            return EXIT_USAGE;
        }
        // a global pool can only be installed once per process
        let _ = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global();
    }
    let config = cli.config.as_deref();
    let section = cli.command.section();
    let result = match cli.command {
        Command::Simulate(a) => load_section(config, section).and_then(|f| commands::simulate(a.merge(f))),
        Command::Discover(a) => load_section(config, section).and_then(|f| commands::discover(a.merge(f))),
        Command::Fit(a) => load_section(config, section).and_then(|f| commands::fit(a.merge(f))),
        Command::Forecast(a) => load_section(config, section).and_then(|f| commands::forecast(a.merge(f))),
        Command::Backtest(a) => load_section(config, section).and_then(|f| commands::backtest(a.merge(f))),
        Command::Compare(a) => load_section(config, section).and_then(|f| commands::compare(a.merge(f))),
        Command::Reproduce(a) => load_section(config, section).and_then(|f| commands::reproduce(a.merge(f))),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn command_line_wins_over_file() {
        let cli = SimulateArgs {
            p: Some(7),
            ..Default::default()
        };
        let file: SimulateArgs = toml::from_str("p = 3\nn = 500\nnoise = \"exponential\"").unwrap();
        let merged = cli.merge(file);
        assert_eq!(merged.p, Some(7));
        assert_eq!(merged.n, Some(500));
        assert_eq!(merged.noise.as_deref(), Some("exponential"));
    }

    #[test]
    fn flattened_sections_parse() {
        let f: BacktestArgs = toml::from_str("panel = \"x.csv\"\nalpha = 0.01\nmethods = [\"neco\", \"hist\"]\ntrain = 100")
            .unwrap();
        assert_eq!(f.engine.alpha, Some(0.01));
        assert_eq!(f.train, Some(100));
        assert_eq!(f.panel.panel.as_deref(), Some(Path::new("x.csv")));
    }

    #[test]
    fn error_codes() {
        assert_eq!(CliError::from(NecoError::InvalidConfig("x".into())).code, EXIT_USAGE);
        assert_eq!(CliError::from(NecoError::MalformedPanel("x".into())).code, EXIT_DATA);
    }
}
