//! GARCH(1,1) with constant mean and Gaussian innovations, plus the Monte
//! Carlo and filtered-historical-simulation VaR built on it.
//!
//! Estimation runs on the standardized series `(x - mean) / sd` and maps the
//! parameters back, which keeps the optimizer scale-free.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::engines::{bootstrap_quantile, check_alpha};
use crate::error::{NecoError, Result};
use crate::rng::rng_from;
use crate::stats::{mean, quantile_select, sample_std};

/// Starting values on the return scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GarchInit {
    pub omega: f64,
    pub a1: f64,
    pub b1: f64,
    pub mu: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GarchFit {
    pub omega: f64,
    pub a1: f64,
    pub b1: f64,
    pub mu: f64,
    /// Conditional volatility of each observation given its past.
    pub sigma_t: Vec<f64>,
    pub sigma_next: f64,
    /// Gaussian log-likelihood at the optimum (return scale, constants dropped).
    pub loglik: f64,
}

impl GarchFit {
    /// Volatility one step after observing `ret` with current volatility `sigma`.
    pub fn step(&self, sigma: f64, ret: f64) -> f64 {
        let e = ret - self.mu;
        (self.omega + self.a1 * e * e + self.b1 * sigma * sigma).sqrt()
    }
}

const MAX_PERSISTENCE: f64 = 0.9999;
const BOX: f64 = 20.0;
const SIMPLEX_TOL: f64 = 1e-8;
const MAX_ITER: usize = 50_000;

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// (ω, a1, b1, μ) from unconstrained coordinates.
fn to_params(theta: &[f64; 4]) -> [f64; 4] {
    let persistence = MAX_PERSISTENCE * logistic(theta[1]);
    let share = logistic(theta[2]);
    [theta[0].exp(), persistence * share, persistence * (1.0 - share), theta[3]]
}

fn to_theta(params: &[f64; 4]) -> [f64; 4] {
    let [omega, a1, b1, mu] = *params;
    let persistence = (a1 + b1).max(1e-12);
    let t = [
        omega.ln(),
        logit((persistence / MAX_PERSISTENCE).min(1.0 - 1e-12)),
        logit((a1 / persistence).clamp(1e-12, 1.0 - 1e-12)),
        mu,
    ];
    t.map(|v| v.clamp(-BOX, BOX))
}

/// Negative Gaussian log-likelihood (up to constants) and the variance path.
fn neg_loglik(y: &[f64], params: &[f64; 4], h_path: Option<&mut Vec<f64>>) -> f64 {
    let [omega, a1, b1, mu] = *params;
    if !(omega > 0.0) || a1 < 0.0 || b1 < 0.0 {
        return f64::INFINITY;
    }
    let n = y.len() as f64;
    let mut h = y.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / n;
    let mut nll = 0.0;
    let mut path = h_path;
    for &v in y {
        let e = v - mu;
        if !(h > 0.0) || !h.is_finite() {
            return f64::INFINITY;
        }
        nll += 0.5 * (h.ln() + e * e / h);
        if let Some(p) = path.as_deref_mut() {
            p.push(h);
        }
        h = omega + a1 * e * e + b1 * h;
    }
    if let Some(p) = path {
        p.push(h);
    }
    nll
}

struct Simplex {
    best: [f64; 4],
    value: f64,
    converged: bool,
}

fn nelder_mead<F: Fn(&[f64; 4]) -> f64>(f: F, start: [f64; 4], step: f64) -> Simplex {
    let clamp = |x: [f64; 4]| x.map(|v| v.clamp(-BOX, BOX));
    let mut pts: Vec<[f64; 4]> = vec![start];
    for k in 0..4 {
        let mut x = start;
        x[k] += if x[k] + step <= BOX { step } else { -step };
        pts.push(x);
    }
    let mut vals: Vec<f64> = pts.iter().map(&f).collect();
    for _ in 0..MAX_ITER {
        let mut order: Vec<usize> = (0..5).collect();
        order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        pts = order.iter().map(|&i| pts[i]).collect();
        vals = order.iter().map(|&i| vals[i]).collect();

        let diameter = pts[1..]
            .iter()
            .map(|x| x.iter().zip(&pts[0]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        if diameter < SIMPLEX_TOL && vals[0].is_finite() {
            return Simplex {
                best: pts[0],
                value: vals[0],
                converged: true,
            };
        }

        let mut centroid = [0.0; 4];
        for x in &pts[..4] {
            for k in 0..4 {
                centroid[k] += x[k] / 4.0;
            }
        }
        let along = |t: f64| clamp(std::array::from_fn(|k| centroid[k] + t * (pts[4][k] - centroid[k])));

        let xr = along(-1.0);
        let fr = f(&xr);
        if fr < vals[0] {
            let xe = along(-2.0);
            let fe = f(&xe);
            if fe < fr {
                pts[4] = xe;
                vals[4] = fe;
            } else {
                pts[4] = xr;
                vals[4] = fr;
            }
            continue;
        }
        if fr < vals[3] {
            pts[4] = xr;
            vals[4] = fr;
            continue;
        }
        let (xc, fc) = if fr < vals[4] {
            let x = along(-0.5);
            (x, f(&x))
        } else {
            let x = along(0.5);
            (x, f(&x))
        };
        if fc < vals[4].min(fr) {
            pts[4] = xc;
            vals[4] = fc;
            continue;
        }
        // shrink towards the best vertex
        for i in 1..5 {
            pts[i] = std::array::from_fn(|k| pts[0][k] + 0.5 * (pts[i][k] - pts[0][k]));
            vals[i] = f(&pts[i]);
        }
    }
    let i = (0..5).min_by(|&a, &b| vals[a].total_cmp(&vals[b])).unwrap_or(0);
    Simplex {
        best: pts[i],
        value: vals[i],
        converged: false,
    }
}

fn standardize(series: &[f64]) -> Result<(Vec<f64>, f64, f64)> {
    if series.len() < 50 {
        return Err(NecoError::InsufficientData(format!(
            "GARCH(1,1) needs at least 50 observations, got {}",
            series.len()
        )));
    }
    if series.iter().any(|x| !x.is_finite()) {
        return Err(NecoError::NumericalError("non-finite value in GARCH input".into()));
    }
    let m = mean(series);
    let s = sample_std(series);
    if !(s > 0.0) {
        return Err(NecoError::DegenerateSeries("GARCH input has zero variance".into()));
    }
    Ok((series.iter().map(|x| (x - m) / s).collect(), m, s))
}

/// Gaussian quasi-MLE of GARCH(1,1) with constant mean. Optimizes over
/// transformed parameters from several starts and keeps the best start whose
/// simplex collapsed below 1e-8.
pub fn fit_garch11(series: &[f64], init: Option<GarchInit>) -> Result<GarchFit> {
    if let Some(i) = init {
        let ok = i.omega > 0.0 && i.a1 >= 0.0 && i.b1 >= 0.0 && i.a1 + i.b1 < 1.0 && i.mu.is_finite();
        if !ok {
            return Err(NecoError::InvalidInit(format!(
                "need omega > 0, a1 >= 0, b1 >= 0, a1 + b1 < 1; got omega={}, a1={}, b1={}",
                i.omega, i.a1, i.b1
            )));
        }
    }
    let (y, m, s) = standardize(series)?;

    let mut starts: Vec<[f64; 4]> = Vec::new();
    if let Some(i) = init {
        starts.push([i.omega / (s * s), i.a1, i.b1, (i.mu - m) / s]);
    }
    for (a, b) in [(0.05, 0.90), (0.10, 0.80), (0.15, 0.50)] {
        starts.push([1.0 - a - b, a, b, 0.0]);
    }

    let objective = |theta: &[f64; 4]| neg_loglik(&y, &to_params(theta), None);
    let mut best: Option<Simplex> = None;
    for start in starts {
        let run = nelder_mead(objective, to_theta(&start), 0.5);
        if run.converged && best.as_ref().is_none_or(|b| run.value < b.value) {
            best = Some(run);
        }
    }
    let Some(best) = best else {
        return Err(NecoError::FitError(
            "GARCH(1,1) optimizer did not converge from any start".into(),
        ));
    };

    let [omega, a1, b1, mu] = to_params(&best.best);
    let mut h = Vec::with_capacity(y.len() + 1);
    let nll = neg_loglik(&y, &[omega, a1, b1, mu], Some(&mut h));
    let h_next = h.pop().unwrap_or(1.0);
    Ok(GarchFit {
        omega: omega * s * s,
        a1,
        b1,
        mu: m + s * mu,
        sigma_t: h.iter().map(|v| s * v.sqrt()).collect(),
        sigma_next: s * h_next.sqrt(),
        loglik: -nll - y.len() as f64 * s.ln(),
    })
}

/// Standard errors of (ω, a1, b1, μ) from a central-difference Hessian of the
/// negative log-likelihood.
pub fn garch_std_errors(series: &[f64], fit: &GarchFit) -> Result<[f64; 4]> {
    let (y, m, s) = standardize(series)?;
    let x0 = [fit.omega / (s * s), fit.a1, fit.b1, (fit.mu - m) / s];
    let steps: [f64; 4] = x0.map(|v| 1e-4 * v.abs().max(1e-2));
    let f = |x: &[f64; 4]| neg_loglik(&y, x, None);
    let mut hess = nalgebra::Matrix4::<f64>::zeros();
    for i in 0..4 {
        for j in i..4 {
            let eval = |di: f64, dj: f64| {
                let mut x = x0;
                x[i] += di * steps[i];
                x[j] += dj * steps[j];
                f(&x)
            };
            let v = (eval(1.0, 1.0) - eval(1.0, -1.0) - eval(-1.0, 1.0) + eval(-1.0, -1.0))
                / (4.0 * steps[i] * steps[j]);
            hess[(i, j)] = v;
            hess[(j, i)] = v;
        }
    }
    let cov = hess
        .try_inverse()
        .filter(|c| (0..4).all(|i| c[(i, i)] > 0.0 && c[(i, i)].is_finite()))
        .ok_or_else(|| NecoError::NumericalError("GARCH information matrix is not positive".into()))?;
    let scale = [s * s, 1.0, 1.0, s];
    Ok(std::array::from_fn(|i| cov[(i, i)].sqrt() * scale[i]))
}

/// α-quantile of `mc_paths` standard normal draws.
pub(crate) fn mc_normal_quantile(alpha: f64, mc_paths: usize, seed: u64) -> Result<f64> {
    check_alpha(alpha)?;
    if mc_paths == 0 {
        return Err(NecoError::InvalidConfig("mc_paths must be positive".into()));
    }
    let mut rng = rng_from(seed);
    let mut draws: Vec<f64> = (0..mc_paths).map(|_| StandardNormal.sample(&mut rng)).collect();
    Ok(quantile_select(&mut draws, alpha))
}

/// Empirical α-quantile of `mc_paths` simulated one-step returns
/// `mu + sigma_next * ε`.
pub fn garch_var(fit: &GarchFit, alpha: f64, mc_paths: usize, seed: u64) -> Result<f64> {
    Ok(fit.mu + fit.sigma_next * mc_normal_quantile(alpha, mc_paths, seed)?)
}

/// α-quantile of bootstrapped standardized residuals `(x_t - mu) / sigma_t`.
pub(crate) fn fhs_standardized_quantile(
    series: &[f64],
    fit: &GarchFit,
    alpha: f64,
    boot_reps: usize,
    seed: u64,
) -> Result<f64> {
    check_alpha(alpha)?;
    if series.len() != fit.sigma_t.len() {
        return Err(NecoError::LengthMismatch {
            left: series.len(),
            right: fit.sigma_t.len(),
        });
    }
    if boot_reps == 0 {
        return Err(NecoError::InvalidConfig("boot_reps must be positive".into()));
    }
    let resid: Vec<f64> = series
        .iter()
        .zip(&fit.sigma_t)
        .map(|(x, s)| (x - fit.mu) / s)
        .collect();
    let mut rng = rng_from(seed);
    Ok(bootstrap_quantile(&resid, alpha, boot_reps * series.len(), &mut rng))
}

/// Filtered historical simulation: bootstrapped standardized residuals
/// rescaled by the one-step volatility forecast.
pub fn fhs_var(series: &[f64], fit: &GarchFit, alpha: f64, boot_reps: usize, seed: u64) -> Result<f64> {
    Ok(fit.mu + fit.sigma_next * fhs_standardized_quantile(series, fit, alpha, boot_reps, seed)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn simulate(omega: f64, a1: f64, b1: f64, n: usize, seed: u64) -> Vec<f64> {
        let mut rng = rng_from(seed);
        let mut h = omega / (1.0 - a1 - b1);
        let mut out = Vec::with_capacity(n);
        for _ in 0..n + 200 {
            let z: f64 = StandardNormal.sample(&mut rng);
            let x = h.sqrt() * z;
            out.push(x);
            h = omega + a1 * x * x + b1 * h;
        }
        out.split_off(200)
    }

    #[test]
    fn transform_round_trip() {
        let p = [0.02, 0.08, 0.9, -0.1];
        let back = to_params(&to_theta(&p));
        for k in 0..4 {
            assert!((back[k] - p[k]).abs() < 1e-9, "{back:?}");
        }
    }

    #[test]
    fn invalid_init_rejected() {
        let x = simulate(1e-6, 0.08, 0.9, 100, 1);
        for init in [
            GarchInit { omega: 0.0, a1: 0.1, b1: 0.8, mu: 0.0 },
            GarchInit { omega: 1e-6, a1: -0.1, b1: 0.8, mu: 0.0 },
            GarchInit { omega: 1e-6, a1: 0.3, b1: 0.7, mu: 0.0 },
        ] {
            assert!(matches!(fit_garch11(&x, Some(init)), Err(NecoError::InvalidInit(_))));
        }
    }

    #[test]
    fn short_series_rejected() {
        assert!(matches!(
            fit_garch11(&[0.1; 20], None),
            Err(NecoError::InsufficientData(_))
        ));
    }

    #[test]
    fn recovers_persistent_process() {
        let x = simulate(1e-6, 0.08, 0.90, 5000, 42);
        let fit = fit_garch11(&x, None).unwrap();
        assert!((fit.a1 - 0.08).abs() < 0.04, "{fit:?}");
        assert!((fit.b1 - 0.90).abs() < 0.05, "{}", fit.b1);
        assert!(fit.a1 + fit.b1 < 1.0);
        assert_eq!(fit.sigma_t.len(), x.len());
        let last = x.len() - 1;
        let next = fit.step(fit.sigma_t[last], x[last]);
        assert!((next - fit.sigma_next).abs() < 1e-12 * fit.sigma_next.max(1e-300) + 1e-15);
    }

    #[test]
    fn zero_volatility_gives_mean() {
        let fit = GarchFit {
            omega: 1e-6,
            a1: 0.1,
            b1: 0.8,
            mu: 0.003,
            sigma_t: vec![],
            sigma_next: 0.0,
            loglik: 0.0,
        };
        assert_eq!(garch_var(&fit, 0.05, 1000, 9).unwrap(), 0.003);
    }

    #[test]
    fn fhs_scales_with_sigma_next() {
        let x = simulate(1e-6, 0.08, 0.9, 300, 5);
        let fit = fit_garch11(&x, None).unwrap();
        let v1 = fhs_var(&x, &fit, 0.05, 200, 3).unwrap();
        let mut doubled = fit.clone();
        doubled.sigma_next *= 2.0;
        let v2 = fhs_var(&x, &doubled, 0.05, 200, 3).unwrap();
        assert!(((v2 - fit.mu) - 2.0 * (v1 - fit.mu)).abs() < 1e-12);
        assert_eq!(v1, fhs_var(&x, &fit, 0.05, 200, 3).unwrap());
    }
}
