//! Adjusted empirical marginals and the Gaussian-copula latent scale.
//!
//! Each instrument is mapped to latent scores `z = Φ⁻¹(F̂(x))` where
//! `F̂(x) = (0.5 + #{x_k ≤ x}) / (N + 1)`. The inverse map goes through
//! [`EmpiricalMarginal::quantile`], which interpolates linearly between the
//! order statistics placed at `F̂(x_(k)) = (k + 0.5) / (N + 1)`.

mod normal;

pub use normal::{standard_normal_cdf, standard_normal_pdf, standard_normal_quantile};
pub(crate) use normal::quantile_unchecked as normal_quantile_unchecked;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{NecoError, Result};
use crate::panel::ReturnPanel;

/// Adjusted empirical CDF of one instrument.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalMarginal {
    sorted_sample: Vec<f64>,
}

impl EmpiricalMarginal {
    pub fn fit(series: &[f64]) -> Result<Self> {
        if series.len() < 2 {
            return Err(NecoError::InvalidSample(format!(
                "need at least 2 observations, got {}",
                series.len()
            )));
        }
        if let Some(bad) = series.iter().find(|x| !x.is_finite()) {
            return Err(NecoError::InvalidSample(format!("non-finite value {bad}")));
        }
        let mut sorted_sample = series.to_vec();
        sorted_sample.sort_by(f64::total_cmp);
        Ok(Self { sorted_sample })
    }

    pub fn n(&self) -> usize {
        self.sorted_sample.len()
    }

    pub fn sorted_sample(&self) -> &[f64] {
        &self.sorted_sample
    }

    /// `(0.5 + #{x_k ≤ x}) / (N + 1)`, always inside (0, 1).
    pub fn cdf(&self, x: f64) -> f64 {
        let count = self.sorted_sample.partition_point(|&v| v <= x);
        (0.5 + count as f64) / (self.n() as f64 + 1.0)
    }

    /// Pseudo-inverse of [`cdf`](Self::cdf); clamps to the sample range outside
    /// the covered probabilities.
    pub fn quantile(&self, u: f64) -> Result<f64> {
        if !(u > 0.0 && u < 1.0) {
            return Err(NecoError::DomainError(u));
        }
        Ok(self.quantile_unchecked(u))
    }

    pub(crate) fn quantile_unchecked(&self, u: f64) -> f64 {
        let n = self.n();
        // fractional 1-based order-statistic index
        let pos = u * (n as f64 + 1.0) - 0.5;
        if pos <= 1.0 {
            return self.sorted_sample[0];
        }
        if pos >= n as f64 {
            return self.sorted_sample[n - 1];
        }
        let nearest = pos.round();
        if (pos - nearest).abs() < 1e-6 {
            return self.sorted_sample[nearest as usize - 1];
        }
        let lo = pos.floor() as usize;
        let frac = pos - lo as f64;
        let (a, b) = (self.sorted_sample[lo - 1], self.sorted_sample[lo]);
        a + frac * (b - a)
    }

    /// Latent score `Φ⁻¹(F̂(x))`.
    pub fn to_latent(&self, x: f64) -> f64 {
        normal_quantile_unchecked(self.cdf(x))
    }

    /// Observation-scale value `F̂⁻¹(Φ(z))`.
    pub fn from_latent(&self, z: f64) -> f64 {
        let u = standard_normal_cdf(z).clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON);
        self.quantile_unchecked(u)
    }

    /// Largest attainable |z| for a sample of this size.
    pub fn latent_bound(&self) -> f64 {
        normal_quantile_unchecked(1.0 - 0.5 / (self.n() as f64 + 1.0))
    }
}

/// Free-function form of [`EmpiricalMarginal::fit`].
pub fn fit_marginal(series: &[f64]) -> Result<EmpiricalMarginal> {
    EmpiricalMarginal::fit(series)
}

/// Free-function form of [`EmpiricalMarginal::quantile`].
pub fn marginal_quantile(m: &EmpiricalMarginal, u: f64) -> Result<f64> {
    m.quantile(u)
}

/// Panel of latent Gaussian scores sharing the source panel's shape and labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentPanel {
    instruments: Vec<String>,
    values: DMatrix<f64>,
}

impl LatentPanel {
    pub fn from_values(instruments: Vec<String>, values: DMatrix<f64>) -> Result<Self> {
        if values.ncols() != instruments.len() {
            return Err(NecoError::LengthMismatch {
                left: values.ncols(),
                right: instruments.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(NecoError::InvalidSample("latent values must be finite".into()));
        }
        Ok(Self { instruments, values })
    }

    pub fn instruments(&self) -> &[String] {
        &self.instruments
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn n_obs(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_instruments(&self) -> usize {
        self.values.ncols()
    }
}

/// Transforms every column with its own adjusted marginal.
pub fn to_latent(panel: &ReturnPanel) -> Result<(LatentPanel, Vec<EmpiricalMarginal>)> {
    let (n, p) = (panel.n_obs(), panel.n_instruments());
    let mut z = DMatrix::zeros(n, p);
    let mut marginals = Vec::with_capacity(p);
    for j in 0..p {
        let col = panel.column(j);
        let m = EmpiricalMarginal::fit(&col)?;
        for (i, x) in col.iter().enumerate() {
            z[(i, j)] = m.to_latent(*x);
        }
        marginals.push(m);
    }
    Ok((LatentPanel::from_values(panel.instruments().to_vec(), z)?, marginals))
}

/// Maps an arbitrary row of observations to the latent scale with fitted marginals.
pub fn latent_row(marginals: &[EmpiricalMarginal], row: &[f64]) -> Vec<f64> {
    marginals.iter().zip(row).map(|(m, x)| m.to_latent(*x)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn adjusted_cdf_examples() {
        let m = fit_marginal(&[3.0, 1.0, 2.0]).unwrap();
        assert_eq!(m.cdf(2.0), 0.625);
        assert_eq!(m.cdf(0.0), 0.5 / 4.0);
        let nine: Vec<f64> = (1..=9).map(f64::from).collect();
        let m9 = fit_marginal(&nine).unwrap();
        assert!((m9.cdf(9.0) - 0.95).abs() < 1e-15);
    }

    #[test]
    fn quantile_examples() {
        let m = fit_marginal(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(m.quantile(0.625).unwrap(), 2.0);
        let m7 = fit_marginal(&[1.0, 4.0, 7.0, 2.0]).unwrap();
        assert_eq!(m7.quantile(0.999).unwrap(), 7.0);
        assert_eq!(m7.quantile(0.001).unwrap(), 1.0);
        assert!(matches!(m.quantile(0.0), Err(NecoError::DomainError(_))));
        assert!(matches!(m.quantile(1.2), Err(NecoError::DomainError(_))));
        // halfway between the knots of 1 and 2
        assert!((m.quantile(0.5).unwrap() - 1.5).abs() < 1e-12);
    }

    #[test]
    fn fit_rejects_non_finite() {
        assert!(matches!(fit_marginal(&[1.0, f64::NAN]), Err(NecoError::InvalidSample(_))));
        assert!(matches!(fit_marginal(&[1.0]), Err(NecoError::InvalidSample(_))));
    }

    #[test]
    fn three_point_latent_column() {
        let vals = DMatrix::from_column_slice(3, 1, &[0.2, -0.1, 0.05]);
        let panel = ReturnPanel::with_synthetic_dates(vec!["A".into()], vals).unwrap();
        let (z, _) = to_latent(&panel).unwrap();
        let expect = |u: f64| standard_normal_quantile(u).unwrap();
        // ranks 3, 1, 2
        assert_eq!(z.values()[(0, 0)], expect(3.5 / 4.0));
        assert_eq!(z.values()[(1, 0)], expect(1.5 / 4.0));
        assert_eq!(z.values()[(2, 0)], expect(2.5 / 4.0));
    }
}
