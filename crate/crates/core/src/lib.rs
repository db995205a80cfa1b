//! Causal network contagion Value-at-Risk.
//!
//! The pipeline maps returns to a Gaussian-copula latent scale, discovers the
//! contemporaneous contagion network with PC-stable, fits a structural
//! equation model on the latent scores and turns its conditional distribution
//! into one-step-ahead VaR forecasts. Baseline engines, a backtesting battery
//! and a simulation harness sit alongside.

pub mod backtest;
pub mod cli;
pub mod copula;
pub mod discovery;
pub mod engines;
pub mod error;
pub mod graph;
pub mod linalg;
pub mod panel;
pub mod rng;
pub mod sem;
pub mod simulation;
pub mod stats;

pub use error::{NecoError, Result};
