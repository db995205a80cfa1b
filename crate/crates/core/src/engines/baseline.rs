//! Variance-covariance and historical-simulation VaR.

use crate::engines::{bootstrap_quantile, check_alpha, z_alpha, VaRForecast, VarMethod};
use crate::error::{NecoError, Result};
use crate::panel::ReturnPanel;
use crate::rng::{derive_seed, rng_from};
use crate::stats::{mean, sample_std};

/// μ̂ - z_α σ̂ per instrument. `index` of the result is the first row after the window.
pub fn varcovar_var(window: &ReturnPanel, alpha: f64) -> Result<VaRForecast> {
    check_alpha(alpha)?;
    if window.n_obs() < 2 {
        return Err(NecoError::InsufficientData(format!(
            "variance-covariance VaR needs at least 2 rows, got {}",
            window.n_obs()
        )));
    }
    let z = z_alpha(alpha);
    let mut values = Vec::with_capacity(window.n_instruments());
    for j in 0..window.n_instruments() {
        let col = window.column(j);
        let first = col[0];
        if col.iter().all(|&x| x == first) {
            return Err(NecoError::DegenerateSeries(window.instruments()[j].clone()));
        }
        values.push(mean(&col) - z * sample_std(&col));
    }
    VaRForecast::new(VarMethod::VarCovar, alpha, values, window.n_obs())
}

/// Bootstrap historical simulation: `boot_reps` resamples of size N are
/// pooled and the interpolated α-quantile of the pool is reported.
pub fn hist_var(window: &ReturnPanel, alpha: f64, boot_reps: usize, seed: u64) -> Result<VaRForecast> {
    check_alpha(alpha)?;
    let n = window.n_obs();
    if n < 20 {
        return Err(NecoError::InsufficientData(format!(
            "historical simulation needs at least 20 rows, got {n}"
        )));
    }
    if boot_reps == 0 {
        return Err(NecoError::InvalidConfig("boot_reps must be positive".into()));
    }
    let values = (0..window.n_instruments())
        .map(|j| {
            let mut rng = rng_from(derive_seed(seed, &[j as u64]));
            bootstrap_quantile(&window.column(j), alpha, boot_reps * n, &mut rng)
        })
        .collect();
    VaRForecast::new(VarMethod::Hist, alpha, values, n)
}
