//! Causal-NECO VaR from the SEM conditional distribution.

use nalgebra::{DMatrix, DVector};

use crate::copula::{standard_normal_cdf, EmpiricalMarginal};
use crate::engines::{check_alpha, z_alpha, VaRForecast, VarMethod};
use crate::error::{NecoError, Result};
use crate::sem::{CovarianceMode, ModelEnsemble, SemModel};

/// `mean_i - z_α sqrt(cov_ii)` from the conditional distribution given the
/// last L return rows, for a model fitted on raw returns.
pub fn neco_var_gaussian(model: &SemModel, history: &DMatrix<f64>, alpha: f64) -> Result<VaRForecast> {
    check_alpha(alpha)?;
    let (mean, cov) = model.conditional_distribution(history, CovarianceMode::Estimated)?;
    let z = z_alpha(alpha);
    let values = (0..model.p()).map(|i| mean[i] - z * cov[(i, i)].sqrt()).collect();
    VaRForecast::new(VarMethod::Neco, alpha, values, 0)
}

/// Copula VaR over a model ensemble: the latent quantile of every member is
/// mapped through the training marginals, the per-instrument minimum is the
/// headline value and the (min, max) spread is kept as the range.
pub fn neco_var_general(
    ensemble: &ModelEnsemble,
    marginals: &[EmpiricalMarginal],
    latent_history: &DMatrix<f64>,
    alpha: f64,
) -> Result<VaRForecast> {
    NecoForecaster::new(ensemble, marginals.to_vec(), alpha, CovarianceMode::Estimated)?
        .forecast(latent_history)
}

struct Member {
    model: SemModel,
    inverse: DMatrix<f64>,
    sd: Vec<f64>,
}

/// Ensemble and marginals prepared once per training window, evaluated for
/// each forecast day.
#[derive(Clone)]
pub struct NecoForecaster {
    members: std::sync::Arc<Vec<Member>>,
    marginals: Vec<EmpiricalMarginal>,
    alpha: f64,
    z: f64,
}

impl NecoForecaster {
    pub fn new(
        ensemble: &ModelEnsemble,
        marginals: Vec<EmpiricalMarginal>,
        alpha: f64,
        mode: CovarianceMode,
    ) -> Result<Self> {
        check_alpha(alpha)?;
        if ensemble.is_empty() {
            return Err(NecoError::InvalidConfig("empty model ensemble".into()));
        }
        let p = ensemble.primary().p();
        if marginals.len() != p {
            return Err(NecoError::LengthMismatch {
                left: marginals.len(),
                right: p,
            });
        }
        let members = ensemble
            .models
            .iter()
            .map(|m| {
                let cov = m.implied_covariance(mode);
                Member {
                    inverse: m.contagion_inverse(),
                    sd: (0..p).map(|i| cov[(i, i)].sqrt()).collect(),
                    model: m.clone(),
                }
            })
            .collect();
        Ok(Self {
            members: std::sync::Arc::new(members),
            marginals,
            alpha,
            z: z_alpha(alpha),
        })
    }

    pub fn lags(&self) -> usize {
        self.members[0].model.lags
    }

    /// VaR on the return scale given the last L latent rows (chronological).
    pub fn forecast(&self, latent_history: &DMatrix<f64>) -> Result<VaRForecast> {
        let p = self.marginals.len();
        let mut lo = vec![f64::INFINITY; p];
        let mut hi = vec![f64::NEG_INFINITY; p];
        for member in self.members.iter() {
            let drift: DVector<f64> = member.model.structural_drift(latent_history)?;
            let mean = &member.inverse * drift;
            for i in 0..p {
                let q_latent = mean[i] - self.z * member.sd[i];
                let u = standard_normal_cdf(q_latent);
                let v = self.marginals[i].quantile_unchecked(u);
                lo[i] = lo[i].min(v);
                hi[i] = hi[i].max(v);
            }
        }
        let mut f = VaRForecast::new(VarMethod::Neco, self.alpha, lo.clone(), 0)?;
        f.range = Some(lo.into_iter().zip(hi).collect());
        Ok(f)
    }
}
