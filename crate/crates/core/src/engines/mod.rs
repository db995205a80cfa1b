//! One-step-ahead VaR engines.
//!
//! VaR is reported on the return scale as a lower quantile, so a 5% VaR is
//! typically negative and a violation is `x <= VaR`.

mod baseline;
mod garch;
mod neco;

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::copula::normal_quantile_unchecked;
use crate::error::{NecoError, Result};
use crate::panel::fmt_num;
use crate::stats::quantile_select;

pub use baseline::{hist_var, varcovar_var};
pub use garch::{fhs_var, fit_garch11, garch_std_errors, garch_var, GarchFit, GarchInit};
pub use neco::{neco_var_gaussian, neco_var_general, NecoForecaster};

pub(crate) use garch::{fhs_standardized_quantile, mc_normal_quantile};

pub const DEFAULT_BOOT_REPS: usize = 1000;
pub const DEFAULT_MC_PATHS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VarMethod {
    Neco,
    VarCovar,
    Hist,
    Garch,
    Fhs,
}

impl VarMethod {
    pub const ALL: [VarMethod; 5] = [
        VarMethod::Neco,
        VarMethod::VarCovar,
        VarMethod::Hist,
        VarMethod::Garch,
        VarMethod::Fhs,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            VarMethod::Neco => "neco",
            VarMethod::VarCovar => "varcovar",
            VarMethod::Hist => "hist",
            VarMethod::Garch => "garch",
            VarMethod::Fhs => "fhs",
        }
    }

    /// Column heading used in comparison tables.
    pub fn display_name(self) -> &'static str {
        match self {
            VarMethod::Neco => "Causal-NECO",
            VarMethod::VarCovar => "VarCovar",
            VarMethod::Hist => "HIST",
            VarMethod::Garch => "GARCH",
            VarMethod::Fhs => "FHS",
        }
    }
}

impl fmt::Display for VarMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for VarMethod {
    type Err = NecoError;

    fn from_str(s: &str) -> Result<Self> {
        VarMethod::ALL
            .into_iter()
            .find(|m| m.tag().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| {
                NecoError::InvalidConfig(format!(
                    "unknown method '{s}' (expected one of neco, varcovar, hist, garch, fhs)"
                ))
            })
    }
}

/// VaR for every instrument at one forecast time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VaRForecast {
    pub alpha: f64,
    pub values: Vec<f64>,
    pub method: VarMethod,
    /// Row index of the forecast day in the source panel.
    pub index: usize,
    /// Per-instrument (min, max) across ensemble members, NECO only.
    pub range: Option<Vec<(f64, f64)>>,
}

impl VaRForecast {
    pub fn new(method: VarMethod, alpha: f64, values: Vec<f64>, index: usize) -> Result<Self> {
        check_alpha(alpha)?;
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(NecoError::NumericalError(format!("non-finite VaR {v} from {method}")));
        }
        Ok(Self {
            alpha,
            values,
            method,
            index,
            range: None,
        })
    }
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(NecoError::InvalidConfig(format!("alpha must lie in (0, 1), got {alpha}")))
    }
}

/// z_α = Φ⁻¹(1 - α).
pub fn z_alpha(alpha: f64) -> f64 {
    normal_quantile_unchecked(1.0 - alpha)
}

/// α-quantile of `draws` values resampled with replacement from `sample`.
pub(crate) fn bootstrap_quantile<R: Rng>(sample: &[f64], alpha: f64, draws: usize, rng: &mut R) -> f64 {
    let n = sample.len();
    let mut pool: Vec<f64> = (0..draws).map(|_| sample[rng.random_range(0..n)]).collect();
    quantile_select(&mut pool, alpha)
}

/// Writes forecasts as `time,instrument,method,alpha,var` rows.
pub fn write_forecasts_csv<W: std::io::Write>(
    writer: W,
    forecasts: &[VaRForecast],
    instruments: &[String],
    times: &[String],
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["time", "instrument", "method", "alpha", "var"])?;
    for f in forecasts {
        let time = times.get(f.index).cloned().unwrap_or_else(|| f.index.to_string());
        for (name, v) in instruments.iter().zip(&f.values) {
            w.write_record([
                time.as_str(),
                name.as_str(),
                f.method.tag(),
                &fmt_num(f.alpha),
                &fmt_num(*v),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn method_tags_round_trip() {
        for m in VarMethod::ALL {
            assert_eq!(m.tag().parse::<VarMethod>().unwrap(), m);
        }
        assert!("garch2".parse::<VarMethod>().is_err());
    }

    #[test]
    fn forecast_rejects_non_finite() {
        assert!(VaRForecast::new(VarMethod::Hist, 0.05, vec![f64::NAN], 0).is_err());
        assert!(VaRForecast::new(VarMethod::Hist, 0.0, vec![0.0], 0).is_err());
    }

    #[test]
    fn forecast_csv_layout() {
        let f = VaRForecast::new(VarMethod::VarCovar, 0.05, vec![-0.5, -0.25], 1).unwrap();
        let mut buf = Vec::new();
        write_forecasts_csv(&mut buf, &[f], &["A".into(), "B".into()], &["d0".into(), "d1".into()])
            .unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "time,instrument,method,alpha,var\n\
             d1,A,varcovar,0.0500000000000000,-0.500000000000000\n\
             d1,B,varcovar,0.0500000000000000,-0.250000000000000\n"
        );
    }
}
