//! Structural equation model with own-lag autoregression and contemporaneous
//! contagion:
//!
//! `X_t = (I - B)⁻¹ (α₀ + A·X_{t-1..t-L} + ε_t)`, `ε_t ~ N(0, diag(σ²))`.
//!
//! `B[(i, j)]` is the effect of instrument `j` on instrument `i`, so the
//! support of `B` is the transpose of the adjacency of the causal DAG.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::copula::LatentPanel;
use crate::discovery::consistent_extensions;
use crate::error::{NecoError, Result};
use crate::graph::CausalGraph;
use crate::linalg::ols;

/// Upper bound on ensemble members built from one CPDAG.
pub const MAX_ENSEMBLE: usize = 64;

/// Which noise covariance enters the conditional covariance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovarianceMode {
    /// (I-B)⁻¹ Σ̂ (I-B)⁻ᵀ with the fitted residual variances.
    #[default]
    Estimated,
    /// (I-B)⁻¹ (I-B)⁻ᵀ, the unit-noise latent form.
    Unit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SemModel {
    pub labels: Vec<String>,
    pub lags: usize,
    pub alpha0: DVector<f64>,
    /// p x L own-lag coefficients; column `l - 1` holds lag `l`.
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub sigma2: DVector<f64>,
    pub graph: CausalGraph,
    /// Standard errors of the entries of `b` (zero off the support).
    pub b_se: DMatrix<f64>,
}

#[derive(Serialize, Deserialize)]
struct SemModelJson {
    labels: Vec<String>,
    #[serde(rename = "L")]
    lags: usize,
    alpha0: Vec<f64>,
    #[serde(rename = "A")]
    a: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    b: Vec<Vec<f64>>,
    sigma2: Vec<f64>,
}

fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn matrix_from_rows(rows: &[Vec<f64>], ncols: usize) -> Result<DMatrix<f64>> {
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(NecoError::InvalidConfig("ragged matrix in model JSON".into()));
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

impl SemModel {
    /// Builds a model, deriving the DAG from the support of `b`.
    pub fn new(
        labels: Vec<String>,
        alpha0: DVector<f64>,
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        sigma2: DVector<f64>,
    ) -> Result<Self> {
        let p = labels.len();
        if alpha0.len() != p || a.nrows() != p || b.shape() != (p, p) || sigma2.len() != p {
            return Err(NecoError::InvalidConfig("model dimensions disagree".into()));
        }
        if sigma2.iter().any(|s| !(*s > 0.0)) {
            return Err(NecoError::InvalidConfig("noise variances must be positive".into()));
        }
        if (0..p).any(|i| b[(i, i)] != 0.0) {
            return Err(NecoError::InvalidConfig("contagion matrix must have zero diagonal".into()));
        }
        let mut edges = Vec::new();
        for i in 0..p {
            for j in 0..p {
                if b[(i, j)] != 0.0 {
                    edges.push((j, i));
                }
            }
        }
        let graph = CausalGraph::from_edges(labels.clone(), edges, [])?;
        Ok(Self {
            lags: a.ncols(),
            b_se: DMatrix::zeros(p, p),
            labels,
            alpha0,
            a,
            b,
            sigma2,
            graph,
        })
    }

    pub fn p(&self) -> usize {
        self.labels.len()
    }

    /// (I - B)⁻¹.
    pub fn contagion_inverse(&self) -> DMatrix<f64> {
        let p = self.p();
        let m = DMatrix::identity(p, p) - &self.b;
        // acyclic support makes I - B unit-triangular up to permutation
        m.try_inverse().expect("I - B is invertible for acyclic B")
    }

    /// Implied contemporaneous covariance (I-B)⁻¹ Σ (I-B)⁻ᵀ.
    pub fn implied_covariance(&self, mode: CovarianceMode) -> DMatrix<f64> {
        let inv = self.contagion_inverse();
        let sigma = match mode {
            CovarianceMode::Estimated => DMatrix::from_diagonal(&self.sigma2),
            CovarianceMode::Unit => DMatrix::identity(self.p(), self.p()),
        };
        let cov = &inv * sigma * inv.transpose();
        // symmetrize against rounding
        (&cov + cov.transpose()) * 0.5
    }

    /// α₀ + A·history, where `history` is L x p in chronological order
    /// (last row is t-1).
    pub fn structural_drift(&self, history: &DMatrix<f64>) -> Result<DVector<f64>> {
        let p = self.p();
        if history.nrows() != self.lags || (self.lags > 0 && history.ncols() != p) {
            return Err(NecoError::LengthMismatch {
                left: history.nrows(),
                right: self.lags,
            });
        }
        let mut drift = self.alpha0.clone();
        for i in 0..p {
            for l in 1..=self.lags {
                drift[i] += self.a[(i, l - 1)] * history[(self.lags - l, i)];
            }
        }
        Ok(drift)
    }

    /// Mean and covariance of X_t given the last L rows.
    pub fn conditional_distribution(
        &self,
        history: &DMatrix<f64>,
        mode: CovarianceMode,
    ) -> Result<(DVector<f64>, DMatrix<f64>)> {
        let drift = self.structural_drift(history)?;
        let mean = self.contagion_inverse() * drift;
        Ok((mean, self.implied_covariance(mode)))
    }

    pub fn to_json(&self) -> Result<String> {
        let dto = SemModelJson {
            labels: self.labels.clone(),
            lags: self.lags,
            alpha0: self.alpha0.iter().copied().collect(),
            a: rows_of(&self.a),
            b: rows_of(&self.b),
            sigma2: self.sigma2.iter().copied().collect(),
        };
        Ok(serde_json::to_string_pretty(&dto)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let dto: SemModelJson = serde_json::from_str(text)?;
        let p = dto.labels.len();
        let a = if dto.lags == 0 {
            DMatrix::zeros(p, 0)
        } else {
            matrix_from_rows(&dto.a, dto.lags)?
        };
        if a.nrows() != p {
            return Err(NecoError::InvalidConfig("A must have one row per instrument".into()));
        }
        let b = matrix_from_rows(&dto.b, p)?;
        Self::new(
            dto.labels,
            DVector::from_vec(dto.alpha0),
            a,
            b,
            DVector::from_vec(dto.sigma2),
        )
    }
}

/// NECOF: share of conditional variance explained by contagion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Necof {
    pub per_node: Vec<f64>,
    pub market: f64,
}

/// `per_node_i = 1 - Σ_ii / V_ii`, `market = 1 - tr Σ / tr V` with
/// V = (I-B)⁻¹ Σ (I-B)⁻ᵀ.
pub fn necof(model: &SemModel) -> Necof {
    let v = model.implied_covariance(CovarianceMode::Estimated);
    let p = model.p();
    let per_node = (0..p)
        .map(|i| (1.0 - model.sigma2[i] / v[(i, i)]).max(0.0))
        .collect();
    let market = (1.0 - model.sigma2.sum() / v.trace()).max(0.0);
    Necof { per_node, market }
}

/// Every member of a fitted equivalence class.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelEnsemble {
    pub models: Vec<SemModel>,
    pub primary_index: usize,
}

impl ModelEnsemble {
    pub fn primary(&self) -> &SemModel {
        &self.models[self.primary_index]
    }

    pub fn len(&self) -> usize {
        self.models.len()
    }

    pub fn is_empty(&self) -> bool {
        self.models.is_empty()
    }

    pub fn lags(&self) -> usize {
        self.models[0].lags
    }
}

#[derive(Debug, Clone)]
struct NodeFit {
    intercept: f64,
    ar: Vec<f64>,
    betas: Vec<(usize, f64, f64)>,
    sigma2: f64,
    rss: f64,
    n: usize,
}

fn fit_node(
    data: &DMatrix<f64>,
    node: usize,
    parents: &[usize],
    lags: usize,
    first_row: usize,
) -> Result<NodeFit> {
    let n_rows = data.nrows();
    let first = first_row.max(lags);
    if first >= n_rows {
        return Err(NecoError::InsufficientData(format!(
            "no rows left after {first} lags for node {node}"
        )));
    }
    let n = n_rows - first;
    let k = 1 + lags + parents.len();
    if n <= k {
        return Err(NecoError::InsufficientData(format!(
            "node {node}: {k} regressors need more than {n} usable rows"
        )));
    }
    let x = DMatrix::from_fn(n, k, |r, c| {
        let t = first + r;
        if c == 0 {
            1.0
        } else if c <= lags {
            data[(t - c, node)]
        } else {
            data[(t, parents[c - 1 - lags])]
        }
    });
    let y = DVector::from_fn(n, |r, _| data[(first + r, node)]);
    let fit = ols(&x, &y).ok_or_else(|| {
        NecoError::NumericalError(format!("rank-deficient regressors for node {node}"))
    })?;
    let se = fit.std_errors();
    let sigma2 = fit.rss / (n - k) as f64;
    let scale = y.iter().map(|v| v * v).sum::<f64>() / n as f64;
    if !(sigma2 > 1e-24 * scale.max(f64::MIN_POSITIVE)) {
        return Err(NecoError::NumericalError(format!(
            "node {node} is fitted exactly; residual variance is zero"
        )));
    }
    Ok(NodeFit {
        intercept: fit.coef[0],
        ar: (1..=lags).map(|c| fit.coef[c]).collect(),
        betas: parents
            .iter()
            .enumerate()
            .map(|(x, &j)| (j, fit.coef[1 + lags + x], se[1 + lags + x]))
            .collect(),
        sigma2,
        rss: fit.rss,
        n,
    })
}

type FitCache = BTreeMap<(usize, Vec<usize>), NodeFit>;

fn fit_dag(
    data: &DMatrix<f64>,
    labels: &[String],
    dag: &CausalGraph,
    lags: usize,
    first_row: usize,
    cache: &mut FitCache,
) -> Result<(SemModel, Vec<NodeFit>)> {
    let p = labels.len();
    let mut alpha0 = DVector::zeros(p);
    let mut a = DMatrix::zeros(p, lags);
    let mut b = DMatrix::zeros(p, p);
    let mut b_se = DMatrix::zeros(p, p);
    let mut sigma2 = DVector::zeros(p);
    let mut fits = Vec::with_capacity(p);
    for i in 0..p {
        let parents = dag.parents(i);
        let key = (i, parents.clone());
        let fit = match cache.get(&key) {
            Some(f) => f.clone(),
            None => {
                let f = fit_node(data, i, &parents, lags, first_row)?;
                cache.insert(key, f.clone());
                f
            }
        };
        alpha0[i] = fit.intercept;
        for (l, v) in fit.ar.iter().enumerate() {
            a[(i, l)] = *v;
        }
        for &(j, beta, se) in &fit.betas {
            b[(i, j)] = beta;
            b_se[(i, j)] = se;
        }
        sigma2[i] = fit.sigma2;
        fits.push(fit);
    }
    let model = SemModel {
        labels: labels.to_vec(),
        lags,
        alpha0,
        a,
        b,
        sigma2,
        graph: dag.clone(),
        b_se,
    };
    Ok((model, fits))
}

/// Least-squares fit of every DAG in the equivalence class of `graph`.
pub fn fit_sem_matrix(
    data: &DMatrix<f64>,
    labels: &[String],
    graph: &CausalGraph,
    lags: usize,
) -> Result<ModelEnsemble> {
    let p = labels.len();
    if data.ncols() != p || graph.p != p {
        return Err(NecoError::LengthMismatch {
            left: data.ncols(),
            right: graph.p,
        });
    }
    let dags = consistent_extensions(graph, MAX_ENSEMBLE);
    let mut cache = FitCache::new();
    let mut models = Vec::with_capacity(dags.len());
    for dag in &dags {
        models.push(fit_dag(data, labels, dag, lags, lags, &mut cache)?.0);
    }
    let primary_index = models
        .iter()
        .enumerate()
        .map(|(i, m)| (i, m.implied_covariance(CovarianceMode::Estimated).trace()))
        .fold((0, f64::NEG_INFINITY), |best, cur| if cur.1 > best.1 { cur } else { best })
        .0;
    Ok(ModelEnsemble {
        models,
        primary_index,
    })
}

/// Fits the SEM on the latent panel.
pub fn fit_sem(latent: &LatentPanel, graph: &CausalGraph, lags: usize) -> Result<ModelEnsemble> {
    fit_sem_matrix(latent.values(), latent.instruments(), graph, lags)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LagCandidate {
    pub lags: usize,
    pub k: usize,
    pub loglik: f64,
    pub aic: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LagSelection {
    pub candidates: Vec<LagCandidate>,
    pub chosen_lags: usize,
}

/// AIC(L) = 2k(L) - 2 loglik(L) over the common sample starting at row
/// `max_lags`; the log-likelihood is the Gaussian one at the ML variance,
/// summed over nodes. Ties go to the smaller L.
pub fn select_lags_matrix(
    data: &DMatrix<f64>,
    labels: &[String],
    graph: &CausalGraph,
    max_lags: usize,
) -> Result<LagSelection> {
    let dag = consistent_extensions(graph, 1)
        .into_iter()
        .next()
        .expect("at least one extension");
    let mut cache = FitCache::new();
    let mut candidates = Vec::with_capacity(max_lags + 1);
    for lags in 0..=max_lags {
        cache.clear();
        let (_, fits) = fit_dag(data, labels, &dag, lags, max_lags, &mut cache)?;
        let mut loglik = 0.0;
        let mut k = 0;
        for f in &fits {
            let n = f.n as f64;
            let s2 = f.rss / n;
            loglik += -0.5 * n * ((2.0 * std::f64::consts::PI * s2).ln() + 1.0);
            // intercept, lags, betas, variance
            k += 1 + f.ar.len() + f.betas.len() + 1;
        }
        candidates.push(LagCandidate {
            lags,
            k,
            loglik,
            aic: 2.0 * k as f64 - 2.0 * loglik,
        });
    }
    let chosen_lags = candidates
        .iter()
        .fold(&candidates[0], |best, c| if c.aic < best.aic { c } else { best })
        .lags;
    Ok(LagSelection {
        candidates,
        chosen_lags,
    })
}

pub fn select_lags(latent: &LatentPanel, graph: &CausalGraph, max_lags: usize) -> Result<LagSelection> {
    select_lags_matrix(latent.values(), latent.instruments(), graph, max_lags)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_node() -> SemModel {
        let b = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.5, 0.0]);
        SemModel::new(
            vec!["X1".into(), "X2".into()],
            DVector::zeros(2),
            DMatrix::zeros(2, 0),
            b,
            DVector::from_vec(vec![1.0, 1.0]),
        )
        .unwrap()
    }

    #[test]
    fn two_node_covariance_by_hand() {
        let m = two_node();
        let (mean, cov) = m
            .conditional_distribution(&DMatrix::zeros(0, 2), CovarianceMode::Estimated)
            .unwrap();
        assert_eq!(mean, DVector::zeros(2));
        let expected = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.25]);
        assert!((cov - expected).abs().max() < 1e-15);
    }

    #[test]
    fn necof_two_node_by_hand() {
        let n = necof(&two_node());
        assert_eq!(n.per_node[0], 0.0);
        assert!((n.per_node[1] - 0.2).abs() < 1e-15);
        assert!((n.market - (1.0 - 2.0 / 2.25)).abs() < 1e-15);
    }

    #[test]
    fn no_contagion_means_no_necof_and_plain_mean() {
        let a = DMatrix::from_row_slice(2, 1, &[0.3, -0.2]);
        let m = SemModel::new(
            vec!["A".into(), "B".into()],
            DVector::from_vec(vec![0.1, 0.2]),
            a,
            DMatrix::zeros(2, 2),
            DVector::from_vec(vec![2.0, 3.0]),
        )
        .unwrap();
        let hist = DMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
        let (mean, cov) = m.conditional_distribution(&hist, CovarianceMode::Estimated).unwrap();
        assert!((mean[0] - 0.4).abs() < 1e-15 && (mean[1] - 0.0).abs() < 1e-15);
        assert_eq!(cov, DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 3.0])));
        let nf = necof(&m);
        assert_eq!(nf.market, 0.0);
        assert!(nf.per_node.iter().all(|v| *v == 0.0));
        assert!(m.conditional_distribution(&DMatrix::zeros(2, 2), CovarianceMode::Unit).is_err());
    }

    #[test]
    fn json_round_trip() {
        let m = two_node();
        let back = SemModel::from_json(&m.to_json().unwrap()).unwrap();
        assert_eq!(back.b, m.b);
        assert_eq!(back.graph, m.graph);
        let v: serde_json::Value = serde_json::from_str(&m.to_json().unwrap()).unwrap();
        for key in ["labels", "L", "alpha0", "A", "B", "sigma2"] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
    }

    #[test]
    fn invalid_models_rejected() {
        let labels = vec!["A".to_string(), "B".to_string()];
        let cyclic = DMatrix::from_row_slice(2, 2, &[0.0, 0.5, 0.5, 0.0]);
        assert!(SemModel::new(labels.clone(), DVector::zeros(2), DMatrix::zeros(2, 0), cyclic, DVector::from_element(2, 1.0)).is_err());
        let diag = DMatrix::from_row_slice(2, 2, &[0.1, 0.0, 0.0, 0.0]);
        assert!(SemModel::new(labels.clone(), DVector::zeros(2), DMatrix::zeros(2, 0), diag, DVector::from_element(2, 1.0)).is_err());
        assert!(SemModel::new(labels, DVector::zeros(2), DMatrix::zeros(2, 0), DMatrix::zeros(2, 2), DVector::from_vec(vec![1.0, 0.0])).is_err());
    }

    #[test]
    fn rank_deficient_design_names_node() {
        // node 2 regresses on two collinear parents
        let data = DMatrix::from_fn(50, 3, |i, j| match j {
            0 => (i as f64 * 0.7).sin(),
            1 => 2.0 * (i as f64 * 0.7).sin(),
            _ => (i as f64 * 1.3).cos(),
        });
        let g = CausalGraph::from_edges(vec!["A".into(), "B".into(), "C".into()], [(0, 2), (1, 2)], [])
            .unwrap();
        match fit_sem_matrix(&data, &g.labels, &g, 0) {
            Err(NecoError::NumericalError(msg)) => assert!(msg.contains("node 2"), "{msg}"),
            other => panic!("expected numerical error, got {other:?}"),
        }
    }

    #[test]
    fn too_few_rows_for_regressors() {
        let data = DMatrix::from_fn(4, 2, |i, j| (i * 3 + j) as f64 * 0.37 % 1.0);
        let g = CausalGraph::from_edges(vec!["A".into(), "B".into()], [(0, 1)], []).unwrap();
        assert!(matches!(
            fit_sem_matrix(&data, &g.labels, &g, 2),
            Err(NecoError::InsufficientData(_))
        ));
    }
}
