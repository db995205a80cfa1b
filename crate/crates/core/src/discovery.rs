//! PC-stable causal discovery on the latent panel: Fisher-z conditional
//! independence tests, order-independent skeleton search, v-structure and
//! Meek-rule orientation, and local parent-set enumeration for undirected edges.

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::copula::{standard_normal_cdf, standard_normal_quantile};
use crate::error::{NecoError, Result};
use crate::graph::{pair, CausalGraph, Pair};
use crate::linalg::correlation_matrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CITestConfig {
    pub alpha_ci: f64,
    pub max_cond_size: Option<usize>,
}

impl Default for CITestConfig {
    fn default() -> Self {
        Self {
            alpha_ci: 0.01,
            max_cond_size: None,
        }
    }
}

impl CITestConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha_ci > 0.0 && self.alpha_ci < 1.0) {
            return Err(NecoError::InvalidConfig(format!(
                "alpha_ci must lie in (0, 1), got {}",
                self.alpha_ci
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CITestResult {
    pub independent: bool,
    pub statistic: f64,
    pub pvalue: f64,
    pub partial_correlation: f64,
}

/// Partial correlation of `i` and `j` given `cond`, from the inverse of the
/// correlation submatrix over `[i, j, cond...]`.
pub fn partial_correlation(corr: &DMatrix<f64>, i: usize, j: usize, cond: &[usize]) -> Result<f64> {
    if cond.is_empty() {
        return Ok(corr[(i, j)]);
    }
    let idx: Vec<usize> = [i, j].iter().chain(cond).copied().collect();
    let k = idx.len();
    let sub = DMatrix::from_fn(k, k, |a, b| corr[(idx[a], idx[b])]);
    let prec = sub
        .cholesky()
        .map(|c| c.inverse())
        .ok_or_else(|| NecoError::NumericalError(format!(
            "singular correlation submatrix for ({i}, {j} | {cond:?})"
        )))?;
    let denom = (prec[(0, 0)] * prec[(1, 1)]).sqrt();
    if !(denom > 0.0) || !denom.is_finite() {
        return Err(NecoError::NumericalError(format!(
            "degenerate precision matrix for ({i}, {j} | {cond:?})"
        )));
    }
    Ok((-prec[(0, 1)] / denom).clamp(-1.0, 1.0))
}

/// Fisher-z test of `i ⟂ j | cond`.
pub fn fisher_z_ci_test(
    corr: &DMatrix<f64>,
    i: usize,
    j: usize,
    cond: &[usize],
    n: usize,
    alpha_ci: f64,
) -> Result<CITestResult> {
    if i == j || cond.contains(&i) || cond.contains(&j) {
        return Err(NecoError::InvalidConfig(format!(
            "CI test needs distinct variables outside the conditioning set: ({i}, {j} | {cond:?})"
        )));
    }
    let dof = n as f64 - cond.len() as f64 - 3.0;
    if dof < 1.0 {
        return Err(NecoError::InsufficientData(format!(
            "n - |S| - 3 = {dof} < 1 for conditioning set of size {}",
            cond.len()
        )));
    }
    let r = partial_correlation(corr, i, j, cond)?;
    let rc = r.clamp(-1.0 + 1e-15, 1.0 - 1e-15);
    let statistic = dof.sqrt() * (0.5 * ((1.0 + rc) / (1.0 - rc)).ln()).abs();
    let pvalue = (2.0 * (1.0 - standard_normal_cdf(statistic))).clamp(0.0, 1.0);
    let critical = standard_normal_quantile(1.0 - alpha_ci / 2.0)?;
    Ok(CITestResult {
        independent: statistic <= critical,
        statistic,
        pvalue,
        partial_correlation: r,
    })
}

/// Undirected skeleton plus separating sets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Skeleton {
    pub p: usize,
    pub edges: BTreeSet<Pair>,
    pub sepsets: BTreeMap<Pair, Vec<usize>>,
}

impl Skeleton {
    pub fn is_adjacent(&self, a: usize, b: usize) -> bool {
        self.edges.contains(&pair(a, b))
    }
}

/// All `k`-subsets of `items` in lexicographic order.
pub(crate) fn subsets(items: &[usize], k: usize) -> Vec<Vec<usize>> {
    fn rec(items: &[usize], k: usize, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for idx in start..items.len() {
            if items.len() - idx < k - cur.len() {
                break;
            }
            cur.push(items[idx]);
            rec(items, k, idx + 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(items, k, 0, &mut Vec::with_capacity(k), &mut out);
    out
}

/// PC-stable skeleton search on a data matrix (rows are observations).
pub fn pc_stable_skeleton(data: &DMatrix<f64>, cfg: &CITestConfig) -> Result<Skeleton> {
    cfg.validate()?;
    let (n, p) = data.shape();
    if n <= p + 3 {
        return Err(NecoError::InsufficientData(format!(
            "PC-stable needs N > p + 3 (N = {n}, p = {p})"
        )));
    }
    let corr = correlation_matrix(data);
    skeleton_from_correlation(&corr, n, cfg)
}

/// Skeleton search driven by a precomputed correlation matrix.
pub fn skeleton_from_correlation(corr: &DMatrix<f64>, n: usize, cfg: &CITestConfig) -> Result<Skeleton> {
    let p = corr.nrows();
    let mut adj: Vec<BTreeSet<usize>> = (0..p)
        .map(|i| (0..p).filter(|&j| j != i).collect())
        .collect();
    let mut sepsets = BTreeMap::new();
    let mut level = 0usize;
    loop {
        if cfg.max_cond_size.is_some_and(|m| level > m) || (n as f64) - (level as f64) - 3.0 < 1.0 {
            break;
        }
        // adjacency sets frozen for the whole level
        let frozen = adj.clone();
        let candidates: Vec<Pair> = (0..p)
            .flat_map(|i| frozen[i].iter().filter(move |&&j| j > i).map(move |&j| (i, j)))
            .filter(|&(i, j)| frozen[i].len() > level || frozen[j].len() > level)
            .collect();
        if candidates.is_empty() {
            break;
        }
        let any_testable = candidates
            .iter()
            .any(|&(i, j)| frozen[i].len() > level || frozen[j].len() > level);
        if !any_testable {
            break;
        }
        let decisions: Vec<Result<Option<(Pair, Vec<usize>)>>> = candidates
            .par_iter()
            .map(|&(i, j)| {
                for (x, y) in [(i, j), (j, i)] {
                    let pool: Vec<usize> = frozen[x].iter().copied().filter(|&v| v != y).collect();
                    if pool.len() < level {
                        continue;
                    }
                    for s in subsets(&pool, level) {
                        let res = fisher_z_ci_test(corr, i, j, &s, n, cfg.alpha_ci)?;
                        if res.independent {
                            return Ok(Some(((i, j), s)));
                        }
                    }
                }
                Ok(None)
            })
            .collect();
        for d in decisions {
            if let Some(((i, j), s)) = d? {
                adj[i].remove(&j);
                adj[j].remove(&i);
                sepsets.insert((i, j), s);
            }
        }
        level += 1;
    }
    let edges = (0..p)
        .flat_map(|i| adj[i].iter().filter(move |&&j| j > i).map(move |&j| (i, j)))
        .collect();
    Ok(Skeleton { p, edges, sepsets })
}

/// Orients a skeleton into a CPDAG: v-structures first, then Meek rules 1-4
/// to closure. Conflicting proposals leave edges undirected and are recorded
/// in `diagnostics`.
pub fn orient_cpdag(skeleton: &Skeleton, labels: Vec<String>) -> CausalGraph {
    let p = skeleton.p;
    let mut g = CausalGraph::empty(labels);
    g.undirected = skeleton.edges.clone();
    g.sepsets = skeleton.sepsets.clone();

    // collect every v-structure proposal before applying any
    let mut proposals: BTreeSet<(usize, usize)> = BTreeSet::new();
    for k in 0..p {
        let nbrs: Vec<usize> = (0..p).filter(|&v| v != k && skeleton.is_adjacent(v, k)).collect();
        for (x, &i) in nbrs.iter().enumerate() {
            for &j in &nbrs[x + 1..] {
                if skeleton.is_adjacent(i, j) {
                    continue;
                }
                let in_sepset = skeleton
                    .sepsets
                    .get(&pair(i, j))
                    .is_some_and(|s| s.contains(&k));
                if !in_sepset {
                    proposals.insert((i, k));
                    proposals.insert((j, k));
                }
            }
        }
    }
    let mut conflicted: BTreeSet<Pair> = BTreeSet::new();
    for &(a, b) in &proposals {
        if proposals.contains(&(b, a)) {
            conflicted.insert(pair(a, b));
        }
    }
    for &(a, b) in &conflicted {
        g.diagnostics
            .push(format!("conflicting v-structure orientations on {a}-{b}; left undirected"));
    }
    for &(a, b) in &proposals {
        if conflicted.contains(&pair(a, b)) {
            continue;
        }
        if g.has_directed_path(b, a) {
            g.diagnostics
                .push(format!("orienting {a}->{b} would close a cycle; left undirected"));
            continue;
        }
        g.undirected.remove(&pair(a, b));
        g.directed.insert((a, b));
    }
    meek_closure(&mut g, &conflicted);
    g
}

fn orient(g: &mut CausalGraph, a: usize, b: usize) -> bool {
    if !g.has_undirected(a, b) {
        return false;
    }
    if g.has_directed_path(b, a) {
        g.diagnostics
            .push(format!("Meek orientation {a}->{b} would close a cycle; left undirected"));
        return false;
    }
    g.undirected.remove(&pair(a, b));
    g.directed.insert((a, b));
    true
}

/// Applies Meek's rules R1-R4 until no edge changes.
pub fn apply_meek_rules(g: &mut CausalGraph) {
    meek_closure(g, &BTreeSet::new());
}

/// Meek closure that never orients the pairs in `frozen`.
fn meek_closure(g: &mut CausalGraph, frozen: &BTreeSet<Pair>) {
    let p = g.p;
    let mut blocked: BTreeSet<(usize, usize)> = frozen
        .iter()
        .flat_map(|&(a, b)| [(a, b), (b, a)])
        .collect();
    loop {
        let mut changed = false;
        let undirected: Vec<Pair> = g.undirected.iter().copied().collect();
        for (u, v) in undirected {
            for (a, b) in [(u, v), (v, u)] {
                if !g.has_undirected(a, b) || blocked.contains(&(a, b)) {
                    continue;
                }
                let fire = meek_r1(g, p, a, b)
                    || meek_r2(g, p, a, b)
                    || meek_r3(g, p, a, b)
                    || meek_r4(g, p, a, b);
                if fire {
                    if orient(g, a, b) {
                        changed = true;
                    } else {
                        blocked.insert((a, b));
                    }
                }
            }
        }
        if !changed {
            break;
        }
    }
}

// R1: c -> a - b, c and b non-adjacent  =>  a -> b
fn meek_r1(g: &CausalGraph, p: usize, a: usize, b: usize) -> bool {
    (0..p).any(|c| c != b && g.has_directed(c, a) && !g.is_adjacent(c, b))
}

// R2: a -> c -> b and a - b  =>  a -> b
fn meek_r2(g: &CausalGraph, p: usize, a: usize, b: usize) -> bool {
    (0..p).any(|c| g.has_directed(a, c) && g.has_directed(c, b))
}

// R3: a - c -> b, a - d -> b, c and d non-adjacent, a - b  =>  a -> b
fn meek_r3(g: &CausalGraph, p: usize, a: usize, b: usize) -> bool {
    let cands: Vec<usize> = (0..p)
        .filter(|&c| g.has_undirected(a, c) && g.has_directed(c, b))
        .collect();
    cands
        .iter()
        .enumerate()
        .any(|(x, &c)| cands[x + 1..].iter().any(|&d| !g.is_adjacent(c, d)))
}

// R4: a - b, a adjacent to c and d, d -> c -> b, b and d non-adjacent  =>  a -> b
fn meek_r4(g: &CausalGraph, p: usize, a: usize, b: usize) -> bool {
    (0..p).any(|c| {
        c != a
            && g.has_directed(c, b)
            && g.is_adjacent(a, c)
            && (0..p).any(|d| {
                d != a && d != b && g.has_directed(d, c) && g.has_undirected(a, d) && !g.is_adjacent(b, d)
            })
    })
}

/// Full discovery: PC-stable skeleton then CPDAG orientation.
pub fn discover(data: &DMatrix<f64>, labels: Vec<String>, cfg: &CITestConfig) -> Result<CausalGraph> {
    let skel = pc_stable_skeleton(data, cfg)?;
    Ok(orient_cpdag(&skel, labels))
}

/// Locally valid parent sets of `node`: directed parents plus every subset of
/// undirected neighbours that does not create a new v-structure at `node`.
pub fn enumerate_parent_sets(g: &CausalGraph, node: usize) -> Vec<Vec<usize>> {
    let base = g.parents(node);
    let undirected = g.undirected_neighbors(node);
    let mut out = Vec::new();
    for k in 0..=undirected.len() {
        for s in subsets(&undirected, k) {
            let clique = s
                .iter()
                .enumerate()
                .all(|(x, &a)| s[x + 1..].iter().all(|&b| g.is_adjacent(a, b)));
            let shielded = s.iter().all(|&a| base.iter().all(|&b| g.is_adjacent(a, b)));
            if clique && shielded {
                let mut set: Vec<usize> = base.iter().chain(&s).copied().collect();
                set.sort_unstable();
                out.push(set);
            }
        }
    }
    out
}

/// DAG members of the equivalence class represented by `g`: every orientation
/// of the undirected edges that stays acyclic and adds no v-structure.
/// Enumeration is depth-first in edge order and stops after `cap` members.
pub fn consistent_extensions(g: &CausalGraph, cap: usize) -> Vec<CausalGraph> {
    let undirected: Vec<Pair> = g.undirected.iter().copied().collect();
    let mut out = Vec::new();
    let mut work = g.clone();
    work.undirected.clear();
    let mut budget = 200_000usize;
    extend(g, &undirected, 0, &mut work, &mut out, cap, &mut budget);
    if out.is_empty() {
        // topological fallback keeps the pipeline total on inconsistent patterns
        let order = g.topological_order().unwrap_or_else(|| (0..g.p).collect());
        let rank: Vec<usize> = {
            let mut r = vec![0; g.p];
            for (pos, &v) in order.iter().enumerate() {
                r[v] = pos;
            }
            r
        };
        let mut dag = g.clone();
        dag.undirected.clear();
        for &(a, b) in &undirected {
            if rank[a] < rank[b] {
                dag.directed.insert((a, b));
            } else {
                dag.directed.insert((b, a));
            }
        }
        dag.diagnostics
            .push("no v-structure-preserving extension found; used topological orientation".into());
        out.push(dag);
    }
    out
}

fn extend(
    original: &CausalGraph,
    edges: &[Pair],
    idx: usize,
    work: &mut CausalGraph,
    out: &mut Vec<CausalGraph>,
    cap: usize,
    budget: &mut usize,
) {
    if out.len() >= cap || *budget == 0 {
        return;
    }
    *budget -= 1;
    if idx == edges.len() {
        out.push(work.clone());
        return;
    }
    let (u, v) = edges[idx];
    for (a, b) in [(u, v), (v, u)] {
        // a -> b must not meet another arrow into b from a node non-adjacent to a;
        // arrows assigned later are checked against this one when they are placed
        let new_collider = work
            .parents(b)
            .into_iter()
            .any(|c| c != a && !original.is_adjacent(c, a));
        if new_collider || work.has_directed_path(b, a) {
            continue;
        }
        work.directed.insert((a, b));
        extend(original, edges, idx + 1, work, out, cap, budget);
        work.directed.remove(&(a, b));
        if out.len() >= cap {
            return;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(p: usize) -> Vec<String> {
        (1..=p).map(|i| format!("X{i}")).collect()
    }

    #[test]
    fn zero_partial_correlation_is_independent() {
        let corr = DMatrix::identity(3, 3);
        let r = fisher_z_ci_test(&corr, 0, 1, &[2], 100, 0.5).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert!(r.independent);
        assert_eq!(r.pvalue, 1.0);
    }

    #[test]
    fn fisher_z_direct_formula() {
        let corr = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.0]);
        let r = fisher_z_ci_test(&corr, 0, 1, &[], 103, 0.01).unwrap();
        // sqrt(100) * atanh(0.5)
        assert!((r.statistic - 5.493_061_443_340_549).abs() < 1e-12);
        assert!(!r.independent);
    }

    #[test]
    fn fisher_z_errors() {
        let corr = DMatrix::identity(3, 3);
        assert!(matches!(
            fisher_z_ci_test(&corr, 0, 1, &[2], 4, 0.05),
            Err(NecoError::InsufficientData(_))
        ));
        let singular = DMatrix::from_row_slice(3, 3, &[1.0, 0.2, 1.0, 0.2, 1.0, 0.2, 1.0, 0.2, 1.0]);
        assert!(matches!(
            fisher_z_ci_test(&singular, 0, 1, &[2], 100, 0.05),
            Err(NecoError::NumericalError(_))
        ));
        assert!(fisher_z_ci_test(&corr, 0, 0, &[], 100, 0.05).is_err());
    }

    #[test]
    fn subsets_lexicographic() {
        assert_eq!(subsets(&[1, 2, 3], 2), vec![vec![1, 2], vec![1, 3], vec![2, 3]]);
        assert_eq!(subsets(&[1, 2], 0), vec![Vec::<usize>::new()]);
        assert!(subsets(&[1], 2).is_empty());
    }

    fn skeleton(p: usize, edges: &[Pair], sepsets: &[(Pair, Vec<usize>)]) -> Skeleton {
        Skeleton {
            p,
            edges: edges.iter().map(|&(a, b)| pair(a, b)).collect(),
            sepsets: sepsets.iter().cloned().collect(),
        }
    }

    #[test]
    fn collider_is_oriented() {
        let s = skeleton(3, &[(0, 2), (1, 2)], &[((0, 1), vec![])]);
        let g = orient_cpdag(&s, labels(3));
        assert!(g.has_directed(0, 2) && g.has_directed(1, 2));
        assert!(g.undirected.is_empty());
    }

    #[test]
    fn chain_stays_undirected() {
        let s = skeleton(3, &[(0, 1), (1, 2)], &[((0, 2), vec![1])]);
        let g = orient_cpdag(&s, labels(3));
        assert!(g.directed.is_empty());
        assert_eq!(g.undirected.len(), 2);
    }

    #[test]
    fn meek_rule_one_propagates() {
        // 0 -> 2 <- 1 collider, then 2 - 3 with 3 non-adjacent to 0, 1
        let s = skeleton(
            4,
            &[(0, 2), (1, 2), (2, 3)],
            &[((0, 1), vec![]), ((0, 3), vec![2]), ((1, 3), vec![2])],
        );
        let g = orient_cpdag(&s, labels(4));
        assert!(g.has_directed(2, 3));
    }

    #[test]
    fn overlapping_colliders_downgrade() {
        // 0 - 1 - 2 - 3 path with empty sepsets everywhere: both 1 and 2 look
        // like colliders and 1-2 gets both orientations
        let s = skeleton(
            4,
            &[(0, 1), (1, 2), (2, 3)],
            &[((0, 2), vec![]), ((1, 3), vec![]), ((0, 3), vec![])],
        );
        let g = orient_cpdag(&s, labels(4));
        assert!(g.has_undirected(1, 2));
        assert!(!g.diagnostics.is_empty());
        assert!(g.is_acyclic());
    }

    #[test]
    fn parent_sets_examples() {
        let g = CausalGraph::from_edges(labels(4), [(1, 0), (2, 0)], []).unwrap();
        assert_eq!(enumerate_parent_sets(&g, 0), vec![vec![1, 2]]);
        // 1 -> 0, 0 - 3, with 1 and 3 adjacent
        let g = CausalGraph::from_edges(labels(4), [(1, 0)], [(0, 3), (1, 3)]).unwrap();
        assert_eq!(enumerate_parent_sets(&g, 0), vec![vec![1], vec![1, 3]]);
    }

    #[test]
    fn extensions_of_chain() {
        let g = CausalGraph::from_edges(labels(3), [], [(0, 1), (1, 2)]).unwrap();
        let ext = consistent_extensions(&g, 64);
        assert_eq!(ext.len(), 3);
        for dag in &ext {
            assert!(dag.is_acyclic());
            assert!(dag.v_structures().is_empty());
        }
    }
}
