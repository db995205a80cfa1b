//! Partially directed graphs over instruments.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{NecoError, Result};

/// Unordered pair stored with the smaller index first.
pub type Pair = (usize, usize);

pub fn pair(a: usize, b: usize) -> Pair {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

/// CPDAG (or DAG, when `undirected` is empty) over `p` nodes.
///
/// A directed edge `(j, i)` means `j -> i`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CausalGraph {
    pub p: usize,
    pub labels: Vec<String>,
    pub directed: BTreeSet<(usize, usize)>,
    pub undirected: BTreeSet<Pair>,
    pub sepsets: BTreeMap<Pair, Vec<usize>>,
    /// Orientation conflicts that were resolved by leaving edges undirected.
    pub diagnostics: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct GraphJson {
    p: usize,
    labels: Vec<String>,
    directed: Vec<[usize; 2]>,
    undirected: Vec<[usize; 2]>,
}

impl CausalGraph {
    pub fn empty(labels: Vec<String>) -> Self {
        Self {
            p: labels.len(),
            labels,
            ..Default::default()
        }
    }

    pub fn from_edges(
        labels: Vec<String>,
        directed: impl IntoIterator<Item = (usize, usize)>,
        undirected: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self> {
        let mut g = Self::empty(labels);
        for (a, b) in directed {
            g.check_pair(a, b)?;
            g.directed.insert((a, b));
        }
        for (a, b) in undirected {
            g.check_pair(a, b)?;
            g.undirected.insert(pair(a, b));
        }
        g.validate()?;
        Ok(g)
    }

    fn check_pair(&self, a: usize, b: usize) -> Result<()> {
        if a >= self.p || b >= self.p {
            return Err(NecoError::InvalidConfig(format!(
                "edge ({a}, {b}) outside graph of {} nodes",
                self.p
            )));
        }
        if a == b {
            return Err(NecoError::InvalidConfig(format!("self-loop on node {a}")));
        }
        Ok(())
    }

    /// Checks the structural invariants: no self-loops, no pair both directed and
    /// undirected (or directed both ways), acyclic directed part.
    pub fn validate(&self) -> Result<()> {
        if self.labels.len() != self.p {
            return Err(NecoError::InvalidConfig("label count differs from p".into()));
        }
        for &(a, b) in &self.directed {
            self.check_pair(a, b)?;
            if self.directed.contains(&(b, a)) || self.undirected.contains(&pair(a, b)) {
                return Err(NecoError::InvalidConfig(format!(
                    "pair ({a}, {b}) carries conflicting marks"
                )));
            }
        }
        for &(a, b) in &self.undirected {
            self.check_pair(a, b)?;
        }
        if !self.is_acyclic() {
            return Err(NecoError::InvalidConfig("directed part has a cycle".into()));
        }
        Ok(())
    }

    pub fn is_adjacent(&self, a: usize, b: usize) -> bool {
        self.directed.contains(&(a, b))
            || self.directed.contains(&(b, a))
            || self.undirected.contains(&pair(a, b))
    }

    pub fn has_directed(&self, from: usize, to: usize) -> bool {
        self.directed.contains(&(from, to))
    }

    pub fn has_undirected(&self, a: usize, b: usize) -> bool {
        self.undirected.contains(&pair(a, b))
    }

    pub fn parents(&self, node: usize) -> Vec<usize> {
        self.directed
            .iter()
            .filter(|&&(_, to)| to == node)
            .map(|&(from, _)| from)
            .collect()
    }

    pub fn children(&self, node: usize) -> Vec<usize> {
        self.directed
            .iter()
            .filter(|&&(from, _)| from == node)
            .map(|&(_, to)| to)
            .collect()
    }

    pub fn undirected_neighbors(&self, node: usize) -> Vec<usize> {
        self.undirected
            .iter()
            .filter_map(|&(a, b)| {
                if a == node {
                    Some(b)
                } else if b == node {
                    Some(a)
                } else {
                    None
                }
            })
            .collect()
    }

    pub fn adjacent(&self, node: usize) -> Vec<usize> {
        (0..self.p).filter(|&o| o != node && self.is_adjacent(node, o)).collect()
    }

    /// Skeleton as a set of unordered pairs.
    pub fn skeleton(&self) -> BTreeSet<Pair> {
        self.directed
            .iter()
            .map(|&(a, b)| pair(a, b))
            .chain(self.undirected.iter().copied())
            .collect()
    }

    pub fn n_edges(&self) -> usize {
        self.directed.len() + self.undirected.len()
    }

    pub fn is_fully_directed(&self) -> bool {
        self.undirected.is_empty()
    }

    /// Edge density relative to the p(p-1)/2 possible pairs.
    pub fn density(&self) -> f64 {
        let max = self.p * self.p.saturating_sub(1) / 2;
        if max == 0 {
            0.0
        } else {
            self.n_edges() as f64 / max as f64
        }
    }

    /// True when `to` is reachable from `from` along directed edges.
    pub fn has_directed_path(&self, from: usize, to: usize) -> bool {
        directed_reachable(self.p, &self.directed, from, to)
    }

    pub fn is_acyclic(&self) -> bool {
        topological_order(self.p, &self.directed).is_some()
    }

    /// Topological order of the directed part, if acyclic.
    pub fn topological_order(&self) -> Option<Vec<usize>> {
        topological_order(self.p, &self.directed)
    }

    /// Unshielded colliders `a -> c <- b` (with `a < b`).
    pub fn v_structures(&self) -> BTreeSet<(usize, usize, usize)> {
        let mut out = BTreeSet::new();
        for c in 0..self.p {
            let pa = self.parents(c);
            for (x, &a) in pa.iter().enumerate() {
                for &b in &pa[x + 1..] {
                    if !self.is_adjacent(a, b) {
                        let (a, b) = pair(a, b);
                        out.insert((a, c, b));
                    }
                }
            }
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        let dto = GraphJson {
            p: self.p,
            labels: self.labels.clone(),
            directed: self.directed.iter().map(|&(a, b)| [a, b]).collect(),
            undirected: self.undirected.iter().map(|&(a, b)| [a, b]).collect(),
        };
        Ok(serde_json::to_string_pretty(&dto)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let dto: GraphJson = serde_json::from_str(text)?;
        if dto.labels.len() != dto.p {
            return Err(NecoError::InvalidConfig("label count differs from p".into()));
        }
        Self::from_edges(
            dto.labels,
            dto.directed.into_iter().map(|[a, b]| (a, b)),
            dto.undirected.into_iter().map(|[a, b]| (a, b)),
        )
    }
}

pub(crate) fn directed_reachable(
    p: usize,
    edges: &BTreeSet<(usize, usize)>,
    from: usize,
    to: usize,
) -> bool {
    let mut seen = vec![false; p];
    let mut queue = VecDeque::from([from]);
    seen[from] = true;
    while let Some(u) = queue.pop_front() {
        if u == to {
            return true;
        }
        for &(a, b) in edges.range((u, 0)..(u + 1, 0)) {
            debug_assert_eq!(a, u);
            if !seen[b] {
                seen[b] = true;
                queue.push_back(b);
            }
        }
    }
    false
}

pub(crate) fn topological_order(p: usize, edges: &BTreeSet<(usize, usize)>) -> Option<Vec<usize>> {
    let mut indeg = vec![0usize; p];
    for &(_, b) in edges {
        indeg[b] += 1;
    }
    let mut ready: VecDeque<usize> = (0..p).filter(|&v| indeg[v] == 0).collect();
    let mut order = Vec::with_capacity(p);
    while let Some(u) = ready.pop_front() {
        order.push(u);
        for &(_, b) in edges.range((u, 0)..(u + 1, 0)) {
            indeg[b] -= 1;
            if indeg[b] == 0 {
                ready.push_back(b);
            }
        }
    }
    (order.len() == p).then_some(order)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(p: usize) -> Vec<String> {
        (1..=p).map(|i| format!("X{i}")).collect()
    }

    #[test]
    fn json_round_trip() {
        let g = CausalGraph::from_edges(labels(4), [(0, 1), (2, 1)], [(2, 3)]).unwrap();
        let back = CausalGraph::from_json(&g.to_json().unwrap()).unwrap();
        assert_eq!(g, back);
        let v: serde_json::Value = serde_json::from_str(&g.to_json().unwrap()).unwrap();
        assert_eq!(v["directed"], serde_json::json!([[0, 1], [2, 1]]));
        assert_eq!(v["undirected"], serde_json::json!([[2, 3]]));
    }

    #[test]
    fn rejects_bad_graphs() {
        assert!(CausalGraph::from_edges(labels(3), [(0, 0)], []).is_err());
        assert!(CausalGraph::from_edges(labels(3), [(0, 1), (1, 2), (2, 0)], []).is_err());
        assert!(CausalGraph::from_edges(labels(3), [(0, 1)], [(0, 1)]).is_err());
        assert!(CausalGraph::from_edges(labels(3), [(0, 5)], []).is_err());
    }

    #[test]
    fn v_structures_found() {
        let g = CausalGraph::from_edges(labels(3), [(0, 2), (1, 2)], []).unwrap();
        assert_eq!(g.v_structures(), BTreeSet::from([(0, 2, 1)]));
        let shielded = CausalGraph::from_edges(labels(3), [(0, 2), (1, 2), (0, 1)], []).unwrap();
        assert!(shielded.v_structures().is_empty());
    }
}
