//! VaR backtesting: coverage and independence tests, loss measures and a
//! rolling-window harness comparing engines.

mod harness;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{NecoError, Result};
use crate::linalg::{independent_columns, ols};
use crate::stats::{chi2_sf, xlogy};

pub use harness::{
    aggregate, rolling_backtest, AggregateStats, BacktestConfig, BacktestOutput, CellReport,
    ComparisonTable, DayRecord, FitFailure,
};

/// Significance level used for the accept/reject verdicts.
pub const TEST_LEVEL: f64 = 0.05;
pub const DEFAULT_DQ_LAGS: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HitSeries {
    pub hits: Vec<bool>,
    pub alpha: f64,
    pub n1: usize,
    pub n0: usize,
    pub alpha_hat: f64,
}

impl HitSeries {
    pub fn from_hits(hits: Vec<bool>, alpha: f64) -> Result<Self> {
        crate::engines::check_alpha(alpha)?;
        if hits.is_empty() {
            return Err(NecoError::InsufficientData("empty hit series".into()));
        }
        let n1 = hits.iter().filter(|h| **h).count();
        let n0 = hits.len() - n1;
        Ok(Self {
            alpha_hat: n1 as f64 / hits.len() as f64,
            hits,
            alpha,
            n1,
            n0,
        })
    }

    pub fn len(&self) -> usize {
        self.hits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hits.is_empty()
    }
}

/// Violation indicator `x_t <= VaR_t`.
pub fn hit_series(returns: &[f64], var: &[f64], alpha: f64) -> Result<HitSeries> {
    if returns.len() != var.len() {
        return Err(NecoError::LengthMismatch {
            left: returns.len(),
            right: var.len(),
        });
    }
    let hits = returns.iter().zip(var).map(|(x, v)| x <= v).collect();
    HitSeries::from_hits(hits, alpha)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestOutcome {
    pub statistic: f64,
    pub pvalue: f64,
    pub accept: bool,
    /// The test could not be carried out (e.g. no violations in a DQ
    /// regression); reported as accepted.
    pub degenerate: bool,
}

impl TestOutcome {
    fn from_statistic(statistic: f64, df: f64) -> Self {
        let statistic = statistic.max(0.0);
        let pvalue = chi2_sf(statistic, df);
        Self {
            statistic,
            pvalue,
            accept: pvalue > TEST_LEVEL,
            degenerate: false,
        }
    }

    fn degenerate() -> Self {
        Self {
            statistic: 0.0,
            pvalue: 1.0,
            accept: true,
            degenerate: true,
        }
    }
}

fn lr_uc_statistic(h: &HitSeries) -> f64 {
    let (n0, n1) = (h.n0 as f64, h.n1 as f64);
    let a = h.alpha;
    let null = xlogy(n0, 1.0 - a) + xlogy(n1, a);
    let alt = xlogy(n0, 1.0 - h.alpha_hat) + xlogy(n1, h.alpha_hat);
    -2.0 * (null - alt)
}

/// Kupiec unconditional coverage likelihood ratio, χ²₁.
pub fn kupiec_uc(h: &HitSeries) -> TestOutcome {
    TestOutcome::from_statistic(lr_uc_statistic(h), 1.0)
}

/// Transition counts (n00, n01, n10, n11) of consecutive hit pairs.
pub fn transition_counts(h: &HitSeries) -> [usize; 4] {
    let mut c = [0usize; 4];
    for w in h.hits.windows(2) {
        c[(w[0] as usize) * 2 + w[1] as usize] += 1;
    }
    c
}

/// Independence part of the conditional coverage test.
pub fn lr_independence(h: &HitSeries) -> f64 {
    let [n00, n01, n10, n11] = transition_counts(h).map(|v| v as f64);
    let ratio = |num: f64, den: f64| if den > 0.0 { num / den } else { 0.0 };
    let pi01 = ratio(n01, n00 + n01);
    let pi11 = ratio(n11, n10 + n11);
    let pi = ratio(n01 + n11, n00 + n01 + n10 + n11);
    let null = xlogy(n00 + n10, 1.0 - pi) + xlogy(n01 + n11, pi);
    let alt = xlogy(n00, 1.0 - pi01) + xlogy(n01, pi01) + xlogy(n10, 1.0 - pi11) + xlogy(n11, pi11);
    (-2.0 * (null - alt)).max(0.0)
}

/// Christoffersen conditional coverage, LR_UC + LR_IND, χ²₂.
pub fn christoffersen_cc(h: &HitSeries) -> TestOutcome {
    if h.len() < 2 {
        return TestOutcome::degenerate();
    }
    TestOutcome::from_statistic(lr_uc_statistic(h).max(0.0) + lr_independence(h), 2.0)
}

/// Engle-Manganelli dynamic quantile test. Regresses `hit_t - α` on
/// `[1, hit_{t-1}, ..., hit_{t-n_lags}, VaR_t]`; linearly dependent columns
/// (a constant VaR duplicates the intercept) are dropped and the degrees of
/// freedom equal the rank of the design.
pub fn dq_test(h: &HitSeries, var: &[f64], n_lags: usize) -> Result<TestOutcome> {
    let t_len = h.len();
    if var.len() != t_len {
        return Err(NecoError::LengthMismatch {
            left: t_len,
            right: var.len(),
        });
    }
    if t_len <= n_lags + 2 {
        return Err(NecoError::InsufficientData(format!(
            "DQ test with {n_lags} lags needs more than {} observations, got {t_len}",
            n_lags + 2
        )));
    }
    let rows: Vec<usize> = (n_lags..t_len).collect();
    let n1 = rows.iter().filter(|&&t| h.hits[t]).count();
    if n1 == 0 || n1 == rows.len() {
        return Ok(TestOutcome::degenerate());
    }
    let k = n_lags + 2;
    let x = DMatrix::from_fn(rows.len(), k, |r, c| {
        let t = rows[r];
        match c {
            0 => 1.0,
            c if c <= n_lags => h.hits[t - c] as u8 as f64,
            _ => var[t],
        }
    });
    let y = DVector::from_iterator(rows.len(), rows.iter().map(|&t| h.hits[t] as u8 as f64 - h.alpha));
    let keep = independent_columns(&x);
    let xk = x.select_columns(&keep);
    let Some(fit) = ols(&xk, &y) else {
        return Ok(TestOutcome::degenerate());
    };
    let fitted = &xk * &fit.coef;
    let stat = fitted.norm_squared() / (h.alpha * (1.0 - h.alpha));
    Ok(TestOutcome::from_statistic(stat, keep.len() as f64))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Deviation {
    pub ad_mean: f64,
    pub ad_max: f64,
    /// No violations: `ad_mean` and `ad_max` are reported as 0.
    pub ad_empty: bool,
    pub ql: f64,
}

/// Absolute deviation beyond VaR on violation days, and average quantile
/// (tick) loss `(α - 1{x <= VaR})(x - VaR)`.
pub fn deviation_and_ql(returns: &[f64], var: &[f64], alpha: f64) -> Result<Deviation> {
    if returns.len() != var.len() {
        return Err(NecoError::LengthMismatch {
            left: returns.len(),
            right: var.len(),
        });
    }
    if returns.is_empty() {
        return Err(NecoError::InsufficientData("empty return series".into()));
    }
    let mut sum = 0.0;
    let mut max: f64 = 0.0;
    let mut count = 0usize;
    let mut ql = 0.0;
    for (x, v) in returns.iter().zip(var) {
        let hit = x <= v;
        if hit {
            let d = (x - v).abs();
            sum += d;
            max = max.max(d);
            count += 1;
        }
        ql += (alpha - if hit { 1.0 } else { 0.0 }) * (x - v);
    }
    Ok(Deviation {
        ad_mean: if count > 0 { sum / count as f64 } else { 0.0 },
        ad_max: max,
        ad_empty: count == 0,
        ql: ql / returns.len() as f64,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestReport {
    pub n_obs: usize,
    pub n1: usize,
    pub alpha_hat: f64,
    /// Actual over expected violations, α̂ / α.
    pub ae: f64,
    pub lr_uc: TestOutcome,
    pub lr_cc: TestOutcome,
    pub dq: TestOutcome,
    pub deviation: Deviation,
}

/// Runs the full battery on one forecast series.
pub fn evaluate(returns: &[f64], var: &[f64], alpha: f64, dq_lags: usize) -> Result<BacktestReport> {
    let h = hit_series(returns, var, alpha)?;
    let dq = if h.len() > dq_lags + 2 {
        dq_test(&h, var, dq_lags)?
    } else {
        TestOutcome::degenerate()
    };
    Ok(BacktestReport {
        n_obs: h.len(),
        n1: h.n1,
        alpha_hat: h.alpha_hat,
        ae: h.alpha_hat / alpha,
        lr_uc: kupiec_uc(&h),
        lr_cc: christoffersen_cc(&h),
        dq,
        deviation: deviation_and_ql(returns, var, alpha)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hits_with(n: usize, ones: &[usize]) -> HitSeries {
        let mut v = vec![false; n];
        for &i in ones {
            v[i] = true;
        }
        HitSeries::from_hits(v, 0.05).unwrap()
    }

    #[test]
    fn hit_boundary_counts() {
        let h = hit_series(&[0.0, -1.0, 1.0], &[0.0, 0.0, 0.0], 0.05).unwrap();
        assert_eq!(h.hits, vec![true, true, false]);
        let h = hit_series(&[1.0; 10], &[0.0; 10], 0.05).unwrap();
        assert_eq!((h.n1, h.alpha_hat), (0, 0.0));
        assert!(hit_series(&[1.0], &[0.0, 0.0], 0.05).is_err());
    }

    #[test]
    fn kupiec_exact_rate() {
        let h = hits_with(100, &[3, 20, 41, 60, 88]);
        assert_eq!(h.alpha_hat, 0.05);
        let t = kupiec_uc(&h);
        assert!(t.statistic.abs() < 1e-9);
        assert!((t.pvalue - 1.0).abs() < 1e-9);
    }

    #[test]
    fn kupiec_reference_value() {
        let h = hits_with(100, &(0..10).map(|i| i * 10).collect::<Vec<_>>());
        let t = kupiec_uc(&h);
        // direct evaluation: -2 ln[(0.95^90 0.05^10) / (0.90^90 0.10^10)]
        let direct = -2.0
            * (90.0 * 0.95f64.ln() + 10.0 * 0.05f64.ln() - 90.0 * 0.90f64.ln() - 10.0 * 0.10f64.ln());
        assert!((t.statistic - direct).abs() < 1e-10);
        assert!((t.statistic - 4.130_843_782_549_277).abs() < 1e-9);
        assert!((t.pvalue - 0.042_108_350_096_184_785).abs() < 1e-8);
        assert!(!t.accept);
    }

    #[test]
    fn zero_violations_cc_reduces_to_uc() {
        let h = hits_with(60, &[]);
        assert_eq!(lr_independence(&h), 0.0);
        let uc = kupiec_uc(&h);
        let cc = christoffersen_cc(&h);
        assert!((uc.statistic - cc.statistic).abs() < 1e-12);
        assert!(uc.statistic > 0.0);
    }

    #[test]
    fn alternating_hits_rejected() {
        let ones: Vec<usize> = (0..100).step_by(2).collect();
        let h = hits_with(100, &ones);
        assert!(lr_independence(&h) > 50.0);
        assert!(!christoffersen_cc(&h).accept);
    }

    #[test]
    fn dq_degenerate_without_violations() {
        let h = hits_with(50, &[]);
        let t = dq_test(&h, &[-1.0; 50], 4).unwrap();
        assert!(t.degenerate && t.accept);
    }

    #[test]
    fn dq_rejects_clustered_hits() {
        let ones: Vec<usize> = (0..25).collect();
        let h = hits_with(500, &ones);
        let t = dq_test(&h, &[-1.0; 500], 4).unwrap();
        assert!(!t.accept, "{t:?}");
        assert!(t.statistic >= 0.0);
    }

    #[test]
    fn deviation_formulas() {
        let d = deviation_and_ql(&[0.1, 0.2], &[0.0, 0.1], 0.05).unwrap();
        assert!(d.ad_empty);
        assert_eq!((d.ad_mean, d.ad_max), (0.0, 0.0));
        assert!((d.ql - 0.005).abs() < 1e-15);

        let d = deviation_and_ql(&[-0.05], &[-0.03], 0.05).unwrap();
        assert!(!d.ad_empty);
        assert!((d.ql - 0.019).abs() < 1e-15);
        assert!((d.ad_mean - 0.02).abs() < 1e-15 && (d.ad_max - 0.02).abs() < 1e-15);
    }

    #[test]
    fn ae_is_rate_ratio() {
        let returns: Vec<f64> = (0..100).map(|i| if i % 20 == 0 { -1.0 } else { 1.0 }).collect();
        let r = evaluate(&returns, &vec![0.0; 100], 0.05, 4).unwrap();
        assert_eq!(r.n1, 5);
        assert!((r.ae - 1.0).abs() < 1e-12);
    }
}
