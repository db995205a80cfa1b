//! Synthetic contagion networks and return paths.

mod study;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{NecoError, Result};
use crate::graph::CausalGraph;
use crate::panel::ReturnPanel;
use crate::rng::{derive_seed, rng_from};
use crate::sem::{necof, SemModel};

pub use study::{
    lag_aic_study, run_study, timing_study, LagAicRow, StudyConfig, StudyKind, StudyOutput, TimingRow,
    TraceRow,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Noise {
    Gaussian,
    Exponential,
}

impl std::str::FromStr for Noise {
    type Err = NecoError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gaussian" | "normal" => Ok(Noise::Gaussian),
            "exponential" | "exp" => Ok(Noise::Exponential),
            other => Err(NecoError::InvalidConfig(format!(
                "unknown noise '{other}' (expected gaussian or exponential)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub p: usize,
    /// Edge probability for each forward pair.
    pub density: f64,
    /// Exact edge count; overrides `density` when set.
    pub n_edges: Option<usize>,
    pub target_necof: Option<f64>,
    pub lags: usize,
    /// Own-lag coefficients are uniform in ±ar_scale / L.
    pub ar_scale: f64,
    pub noise: Noise,
    pub sigma: f64,
    pub shock_period: Option<usize>,
    pub shock_scale: f64,
    pub n: usize,
    pub burn_in: usize,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            p: 5,
            density: 0.7,
            n_edges: None,
            target_necof: None,
            lags: 1,
            ar_scale: 0.2,
            noise: Noise::Gaussian,
            sigma: 0.01,
            shock_period: None,
            shock_scale: 5.0,
            n: 350,
            burn_in: 100,
            seed: 1,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(NecoError::InvalidConfig(m));
        if self.p == 0 {
            return bad("p must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.density) {
            return bad(format!("density must lie in [0, 1], got {}", self.density));
        }
        if let Some(e) = self.n_edges {
            let max = self.p * (self.p - 1) / 2;
            if e > max {
                return bad(format!("{e} edges exceed the {max} possible for p = {}", self.p));
            }
        }
        if let Some(t) = self.target_necof {
            if !(0.0..1.0).contains(&t) {
                return bad(format!("target NECOF must lie in [0, 1), got {t}"));
            }
        }
        if !(self.sigma > 0.0) || !self.sigma.is_finite() {
            return bad(format!("sigma must be positive, got {}", self.sigma));
        }
        if self.shock_period == Some(0) {
            return bad("shock period must be at least 1".into());
        }
        if !(self.ar_scale >= 0.0 && self.ar_scale < 1.0) {
            return bad(format!("ar_scale must lie in [0, 1), got {}", self.ar_scale));
        }
        if self.n == 0 {
            return bad("n must be positive".into());
        }
        Ok(())
    }
}

fn labels(p: usize) -> Vec<String> {
    (1..=p).map(|i| format!("X{i}")).collect()
}

/// Random DAG: a uniform permutation fixes the causal order and each forward
/// pair is included independently with probability `density`.
pub fn random_dag(p: usize, density: f64, seed: u64) -> Result<CausalGraph> {
    if !(0.0..=1.0).contains(&density) {
        return Err(NecoError::InvalidConfig(format!("density must lie in [0, 1], got {density}")));
    }
    let mut rng = rng_from(seed);
    let mut order: Vec<usize> = (0..p).collect();
    order.shuffle(&mut rng);
    let mut edges = Vec::new();
    for a in 0..p {
        for b in a + 1..p {
            if rng.random::<f64>() < density {
                edges.push((order[a], order[b]));
            }
        }
    }
    CausalGraph::from_edges(labels(p), edges, [])
}

/// Random DAG with exactly `n_edges` forward pairs of a uniform order.
pub fn random_dag_with_edges(p: usize, n_edges: usize, seed: u64) -> Result<CausalGraph> {
    let max = p * p.saturating_sub(1) / 2;
    if n_edges > max {
        return Err(NecoError::InvalidConfig(format!("{n_edges} edges exceed the {max} possible")));
    }
    let mut rng = rng_from(seed);
    let mut order: Vec<usize> = (0..p).collect();
    order.shuffle(&mut rng);
    let mut pairs: Vec<(usize, usize)> = (0..p)
        .flat_map(|a| (a + 1..p).map(move |b| (a, b)))
        .collect();
    pairs.shuffle(&mut rng);
    let edges = pairs[..n_edges].iter().map(|&(a, b)| (order[a], order[b]));
    CausalGraph::from_edges(labels(p), edges, [])
}

/// The five-instrument, seven-link benchmark network.
pub fn benchmark_network() -> CausalGraph {
    CausalGraph::from_edges(
        labels(5),
        [(0, 3), (1, 2), (1, 3), (1, 4), (2, 3), (2, 4), (3, 4)],
        [],
    )
    .expect("benchmark network is acyclic")
}

/// Edge coefficients with magnitude uniform in [0.3, 0.9] and random sign.
/// `B[(i, j)]` holds the effect of `j` on `i`.
pub fn draw_coefficients<R: Rng>(graph: &CausalGraph, rng: &mut R) -> DMatrix<f64> {
    let mut b = DMatrix::zeros(graph.p, graph.p);
    for &(from, to) in &graph.directed {
        let magnitude = rng.random_range(0.3..=0.9);
        let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
        b[(to, from)] = sign * magnitude;
    }
    b
}

fn market_necof(labels: &[String], b: &DMatrix<f64>, sigma2: &DVector<f64>) -> Result<f64> {
    let p = labels.len();
    let model = SemModel::new(labels.to_vec(), DVector::zeros(p), DMatrix::zeros(p, 0), b.clone(), sigma2.clone())?;
    Ok(necof(&model).market)
}

/// Scales `base_coeffs` by a common factor found by bisection so that the
/// market NECOF hits `target` within 1e-4. The returned model has no lags.
pub fn calibrate_contagion(
    graph: &CausalGraph,
    base_coeffs: &DMatrix<f64>,
    target: f64,
    sigma: f64,
) -> Result<SemModel> {
    let p = graph.p;
    if base_coeffs.shape() != (p, p) {
        return Err(NecoError::InvalidConfig("coefficient matrix does not match the graph".into()));
    }
    for i in 0..p {
        for j in 0..p {
            if (base_coeffs[(i, j)] != 0.0) != graph.has_directed(j, i) {
                return Err(NecoError::InvalidConfig(format!(
                    "coefficient support differs from the graph at ({i}, {j})"
                )));
            }
        }
    }
    if !(0.0..1.0).contains(&target) {
        return Err(NecoError::CalibrationError {
            target,
            supremum: if graph.directed.is_empty() { 0.0 } else { 1.0 },
        });
    }
    let sigma2 = DVector::from_element(p, sigma * sigma);
    let labels = graph.labels.clone();
    let build = |c: f64| {
        SemModel::new(labels.clone(), DVector::zeros(p), DMatrix::zeros(p, 0), base_coeffs * c, sigma2.clone())
    };
    if target == 0.0 {
        return build(0.0);
    }
    let f = |c: f64| market_necof(&labels, &(base_coeffs * c), &sigma2);

    let mut hi = 1.0;
    let mut achieved = f(hi)?;
    while achieved < target {
        if hi > 1e8 {
            return Err(NecoError::CalibrationError {
                target,
                supremum: achieved,
            });
        }
        hi *= 2.0;
        achieved = f(hi)?;
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let v = f(mid)?;
        if (v - target).abs() < 1e-9 {
            lo = mid;
            hi = mid;
            break;
        }
        if v < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let model = build(0.5 * (lo + hi))?;
    let got = necof(&model).market;
    if (got - target).abs() > 1e-4 {
        return Err(NecoError::CalibrationError {
            target,
            supremum: got,
        });
    }
    Ok(model)
}

/// Attaches own-lag dynamics with coefficients uniform in ±`ar_scale / L`.
pub fn with_own_lags<R: Rng>(model: &SemModel, lags: usize, ar_scale: f64, rng: &mut R) -> Result<SemModel> {
    let p = model.p();
    let bound = if lags > 0 { ar_scale / lags as f64 } else { 0.0 };
    let a = DMatrix::from_fn(p, lags, |_, _| if bound > 0.0 { rng.random_range(-bound..=bound) } else { 0.0 });
    SemModel::new(model.labels.clone(), model.alpha0.clone(), a, model.b.clone(), model.sigma2.clone())
}

/// Builds a random model from the configuration: DAG, coefficients,
/// contagion calibration and own lags.
pub fn model_from_config(cfg: &SimConfig, graph: Option<&CausalGraph>) -> Result<SemModel> {
    cfg.validate()?;
    let owned;
    let graph = match graph {
        Some(g) => g,
        None => {
            let s = derive_seed(cfg.seed, &[1]);
            owned = match cfg.n_edges {
                Some(e) => random_dag_with_edges(cfg.p, e, s)?,
                None => random_dag(cfg.p, cfg.density, s)?,
            };
            &owned
        }
    };
    let mut rng = rng_from(derive_seed(cfg.seed, &[2]));
    let base = draw_coefficients(graph, &mut rng);
    let model = match cfg.target_necof {
        Some(t) => calibrate_contagion(graph, &base, t, cfg.sigma)?,
        None => {
            let p = graph.p;
            SemModel::new(
                graph.labels.clone(),
                DVector::zeros(p),
                DMatrix::zeros(p, 0),
                base,
                DVector::from_element(p, cfg.sigma * cfg.sigma),
            )?
        }
    };
    with_own_lags(&model, cfg.lags, cfg.ar_scale, &mut rng)
}

/// Iterates the structural recursion in causal order. Noise is Gaussian or
/// centred exponential with variance σ_i²; on every `shock_period`-th
/// retained row `shock_scale · σ_i` is subtracted from every innovation.
/// The first `burn_in` steps are discarded.
pub fn simulate_sem(model: &SemModel, cfg: &SimConfig) -> Result<ReturnPanel> {
    cfg.validate()?;
    let p = model.p();
    let lags = model.lags;
    let order = model
        .graph
        .topological_order()
        .ok_or_else(|| NecoError::InvalidConfig("model graph is cyclic".into()))?;
    let sd: Vec<f64> = model.sigma2.iter().map(|s| s.sqrt()).collect();
    let parents: Vec<Vec<(usize, f64)>> = (0..p)
        .map(|i| (0..p).filter(|&j| model.b[(i, j)] != 0.0).map(|j| (j, model.b[(i, j)])).collect())
        .collect();

    let total = cfg.burn_in + cfg.n;
    let mut rng = rng_from(derive_seed(cfg.seed, &[3]));
    let mut path = DMatrix::zeros(total, p);
    let mut eps = vec![0.0; p];
    for t in 0..total {
        for (i, e) in eps.iter_mut().enumerate() {
            let draw: f64 = match cfg.noise {
                Noise::Gaussian => StandardNormal.sample(&mut rng),
                Noise::Exponential => {
                    let e1: f64 = Exp1.sample(&mut rng);
                    e1 - 1.0
                }
            };
            *e = sd[i] * draw;
        }
        if let Some(period) = cfg.shock_period {
            if t >= cfg.burn_in && (t - cfg.burn_in + 1).is_multiple_of(period) {
                for (i, e) in eps.iter_mut().enumerate() {
                    *e -= cfg.shock_scale * sd[i];
                }
            }
        }
        for &i in &order {
            let mut x = model.alpha0[i] + eps[i];
            for l in 1..=lags.min(t) {
                x += model.a[(i, l - 1)] * path[(t - l, i)];
            }
            for &(j, b) in &parents[i] {
                x += b * path[(t, j)];
            }
            path[(t, i)] = x;
        }
    }
    let values = path.rows(cfg.burn_in, cfg.n).into_owned();
    ReturnPanel::with_synthetic_dates(model.labels.clone(), values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::{mean, sample_variance};

    #[test]
    fn density_extremes() {
        assert_eq!(random_dag(6, 0.0, 1).unwrap().n_edges(), 0);
        let g = random_dag(5, 1.0, 1).unwrap();
        assert_eq!(g.n_edges(), 10);
        assert!(g.is_acyclic());
    }

    #[test]
    fn benchmark_network_shape() {
        let g = benchmark_network();
        assert_eq!(g.n_edges(), 7);
        assert!((g.density() - 0.7).abs() < 1e-12);
        let g = random_dag_with_edges(5, 7, 3).unwrap();
        assert_eq!(g.n_edges(), 7);
    }

    #[test]
    fn calibration_hits_targets() {
        let g = benchmark_network();
        let mut rng = rng_from(5);
        let base = draw_coefficients(&g, &mut rng);
        let m = calibrate_contagion(&g, &base, 0.47, 0.01).unwrap();
        assert!((necof(&m).market - 0.47).abs() < 1e-4);
        let zero = calibrate_contagion(&g, &base, 0.0, 0.01).unwrap();
        assert_eq!(zero.b, DMatrix::zeros(5, 5));

        let g10 = random_dag_with_edges(10, 14, 9).unwrap();
        let base = draw_coefficients(&g10, &mut rng);
        for t in [0.0, 0.19, 0.47, 0.73, 0.83] {
            let m = calibrate_contagion(&g10, &base, t, 1.0).unwrap();
            assert!((necof(&m).market - t).abs() < 1e-4, "target {t}");
        }
    }

    #[test]
    fn calibration_unreachable_on_empty_graph() {
        let g = CausalGraph::empty(labels(3));
        match calibrate_contagion(&g, &DMatrix::zeros(3, 3), 0.3, 1.0) {
            Err(NecoError::CalibrationError { supremum, .. }) => assert_eq!(supremum, 0.0),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn independent_gaussian_moments() {
        let cfg = SimConfig {
            p: 3,
            density: 0.0,
            lags: 0,
            sigma: 0.5,
            n: 20_000,
            ..Default::default()
        };
        let model = model_from_config(&cfg, None).unwrap();
        let panel = simulate_sem(&model, &cfg).unwrap();
        let n = cfg.n as f64;
        for j in 0..3 {
            let col = panel.column(j);
            assert!(mean(&col).abs() < 5.0 * 0.5 / n.sqrt());
            assert!((sample_variance(&col) / 0.25 - 1.0).abs() < 5.0 * (2.0 / n).sqrt());
        }
    }

    #[test]
    fn shocks_hit_every_period() {
        let base = SimConfig {
            p: 3,
            density: 0.0,
            n: 1000,
            seed: 4,
            ..Default::default()
        };
        let shocked = SimConfig {
            shock_period: Some(100),
            ..base.clone()
        };
        let model = model_from_config(&base, None).unwrap();
        let a = simulate_sem(&model, &base).unwrap();
        let b = simulate_sem(&model, &shocked).unwrap();
        // own-lag carry-over is at most 0.2 of the 5 sigma shock
        let drop = 4.0 * base.sigma;
        let rows: Vec<usize> = (0..1000)
            .filter(|&t| (0..3).all(|j| b.values()[(t, j)] < a.values()[(t, j)] - drop))
            .collect();
        assert_eq!(rows, (1..=10).map(|k| 100 * k - 1).collect::<Vec<_>>());
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let cfg = SimConfig {
            noise: Noise::Exponential,
            target_necof: Some(0.47),
            shock_period: Some(100),
            ..Default::default()
        };
        let m = model_from_config(&cfg, Some(&benchmark_network())).unwrap();
        assert_eq!(simulate_sem(&m, &cfg).unwrap(), simulate_sem(&m, &cfg).unwrap());
    }
}
