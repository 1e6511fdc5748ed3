//! Consistent user groups as cliques.
//!
//! Two users are joined when their datasets can be labeled by one class
//! member. Under [`EdgeBasis::PairwiseLabels`] that only means no point
//! receives opposite labels; under [`EdgeBasis::OracleChecked`] the
//! consistency oracle must accept the pooled data. For the powerset class
//! the two coincide and groups are consistent exactly when they are cliques;
//! for richer classes pairwise consistency does not imply group consistency.

use std::fmt::Write as _;

use itertools::Itertools;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hypothesis::{HypothesisClass, LabeledExample, Point};
use crate::oracle::OracleSet;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EdgeBasis {
    PairwiseLabels,
    OracleChecked,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "GraphRepr", into = "GraphRepr")]
pub struct ConsistencyGraph {
    n: usize,
    basis: EdgeBasis,
    adjacency: Vec<Vec<bool>>,
    edges: Vec<(usize, usize)>,
}

#[derive(Serialize, Deserialize)]
struct GraphRepr {
    n: usize,
    basis: EdgeBasis,
    edges: Vec<(usize, usize)>,
}

impl TryFrom<GraphRepr> for ConsistencyGraph {
    type Error = Error;
    fn try_from(r: GraphRepr) -> Result<Self> {
        Self::from_edges(r.n, r.basis, &r.edges)
    }
}

impl From<ConsistencyGraph> for GraphRepr {
    fn from(g: ConsistencyGraph) -> Self {
        GraphRepr {
            n: g.n,
            basis: g.basis,
            edges: g.edges,
        }
    }
}

impl ConsistencyGraph {
    /// Builds a graph from an undirected edge list. Self-loops are dropped.
    pub fn from_edges(n: usize, basis: EdgeBasis, edges: &[(usize, usize)]) -> Result<Self> {
        let mut adjacency = vec![vec![false; n]; n];
        for &(a, b) in edges {
            if a >= n || b >= n {
                return Err(Error::param(
                    "edges",
                    format!("edge ({a}, {b}) outside {n} vertices"),
                ));
            }
            if a != b {
                adjacency[a][b] = true;
                adjacency[b][a] = true;
            }
        }
        Ok(Self::from_adjacency(basis, adjacency))
    }

    fn from_adjacency(basis: EdgeBasis, adjacency: Vec<Vec<bool>>) -> Self {
        let n = adjacency.len();
        let edges = (0..n)
            .tuple_combinations()
            .filter(|&(a, b)| adjacency[a][b])
            .collect();
        Self {
            n,
            basis,
            adjacency,
            edges,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn basis(&self) -> EdgeBasis {
        self.basis
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.adjacency[a][b]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adjacency[v].iter().filter(|&&e| e).count()
    }

    /// Edges `(a, b)` with `a < b`, sorted.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn is_clique(&self, vertices: &[usize]) -> bool {
        vertices
            .iter()
            .tuple_combinations()
            .all(|(&a, &b)| a != b && self.adjacency[a][b])
    }

    /// One `i j` pair per line, 0-indexed.
    pub fn to_edge_list(&self) -> String {
        let mut out = String::new();
        for (a, b) in &self.edges {
            writeln!(out, "{a} {b}").expect("writing to a String");
        }
        out
    }

    pub fn parse_edge_list(n: usize, basis: EdgeBasis, text: &str) -> Result<Self> {
        let mut edges = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let parsed: Option<(usize, usize)> = line
                .split_whitespace()
                .map(|t| t.parse().ok())
                .collect::<Option<Vec<usize>>>()
                .and_then(|v| v.into_iter().collect_tuple());
            match parsed {
                Some(e) => edges.push(e),
                None => {
                    return Err(Error::Serde(format!(
                        "line {}: expected `i j`, got {line:?}",
                        lineno + 1
                    )))
                }
            }
        }
        Self::from_edges(n, basis, &edges)
    }
}

/// Label sets per point: bit 0 for label 0, bit 1 for label 1.
fn label_masks(domain_size: usize, data: &[LabeledExample]) -> Vec<u8> {
    let mut masks = vec![0u8; domain_size];
    for ex in data {
        masks[ex.point.0] |= if ex.label { 2 } else { 1 };
    }
    masks
}

/// Consistency graph over user datasets. Edges are symmetric with no self-loops.
///
/// On a powerset class the two bases agree as long as every dataset is
/// consistent on its own and none labels ⊥ with 1; either kind of dataset
/// fails the joint check without any cross-dataset label conflict.
pub fn build_consistency_graph(
    datasets: &[Vec<LabeledExample>],
    class: &HypothesisClass,
    basis: EdgeBasis,
) -> Result<ConsistencyGraph> {
    for ex in datasets.iter().flatten() {
        class.check_point(ex.point)?;
    }
    let n = datasets.len();
    let mut adjacency = vec![vec![false; n]; n];
    match basis {
        EdgeBasis::PairwiseLabels => {
            let masks: Vec<Vec<u8>> = datasets
                .iter()
                .map(|s| label_masks(class.domain_size(), s))
                .collect();
            for (a, b) in (0..n).tuple_combinations() {
                let conflict = masks[a]
                    .iter()
                    .zip(&masks[b])
                    .any(|(&x, &y)| (x & 1 != 0 && y & 2 != 0) || (x & 2 != 0 && y & 1 != 0));
                adjacency[a][b] = !conflict;
                adjacency[b][a] = !conflict;
            }
        }
        EdgeBasis::OracleChecked => {
            for (a, b) in (0..n).tuple_combinations() {
                let ok = class
                    .consistent_union([datasets[a].as_slice(), datasets[b].as_slice()])?
                    .is_some();
                adjacency[a][b] = ok;
                adjacency[b][a] = ok;
            }
        }
    }
    Ok(ConsistencyGraph::from_adjacency(basis, adjacency))
}

/// Whether the pooled data of `group` has a consistent class member.
pub fn group_is_consistent(
    datasets: &[Vec<LabeledExample>],
    class: &HypothesisClass,
    group: &[usize],
) -> Result<bool> {
    Ok(class
        .consistent_union(group.iter().map(|&i| datasets[i].as_slice()))?
        .is_some())
}

/// A largest group of at least `min_size` users with jointly consistent data,
/// found by exhaustive search. Ties go to the lexicographically first group.
pub fn max_consistent_group_exhaustive(
    datasets: &[Vec<LabeledExample>],
    class: &HypothesisClass,
    min_size: usize,
    cap: usize,
) -> Result<Option<Vec<usize>>> {
    let n = datasets.len();
    if n > cap {
        return Err(Error::SearchCap { group_size: n, cap });
    }
    if min_size > n {
        return Ok(None);
    }
    for size in (min_size..=n).rev() {
        for group in (0..n).combinations(size) {
            if group_is_consistent(datasets, class, &group)? {
                return Ok(Some(group));
            }
        }
    }
    Ok(None)
}

/// Highest-degree-first greedy clique. Returns vertices in ascending order.
pub fn greedy_consistent_group(graph: &ConsistencyGraph) -> Vec<usize> {
    let order = (0..graph.n()).sorted_by_key(|&v| (std::cmp::Reverse(graph.degree(v)), v));
    let mut clique: Vec<usize> = Vec::new();
    for v in order {
        if clique.iter().all(|&u| graph.has_edge(u, v)) {
            clique.push(v);
        }
    }
    clique.sort_unstable();
    clique
}

/// Draws `per_user` samples from every oracle.
pub fn draw_datasets<O: OracleSet>(oracles: &mut O, per_user: u64) -> Vec<Vec<LabeledExample>> {
    (0..oracles.n())
        .map(|i| (0..per_user).map(|_| oracles.query(i)).collect())
        .collect()
}

/// Realizes a graph as user datasets over a powerset class: each missing edge
/// `(i, j)` gets its own point, labeled 0 by `i` and 1 by `j`. A group is
/// then consistent exactly when it is a clique.
pub fn reduction_datasets(
    graph: &ConsistencyGraph,
) -> Result<(HypothesisClass, Vec<Vec<LabeledExample>>)> {
    let n = graph.n();
    let missing: Vec<(usize, usize)> = (0..n)
        .tuple_combinations()
        .filter(|&(a, b)| !graph.has_edge(a, b))
        .collect();
    let class = HypothesisClass::powerset(missing.len().max(1))?;
    let mut datasets = vec![Vec::new(); n];
    for (p, &(a, b)) in missing.iter().enumerate() {
        datasets[a].push(LabeledExample {
            point: Point(p),
            label: false,
        });
        datasets[b].push(LabeledExample {
            point: Point(p),
            label: true,
        });
    }
    Ok((class, datasets))
}

/// All intervals `[a, b]` over `0..m` plus the empty interval, as an explicit
/// class of VC dimension 2.
pub fn interval_class(m: usize) -> Result<HypothesisClass> {
    let mut members = vec![vec![false; m]];
    for (a, b) in (0..m).flat_map(|a| (a..m).map(move |b| (a, b))) {
        members.push((0..m).map(|x| a <= x && x <= b).collect());
    }
    HypothesisClass::finite_explicit(m, members, 2.min(m))
}

/// Three datasets over intervals on five points that are pairwise consistent
/// but have no common consistent member: 1-labels at both ends, a 0 between.
pub fn pairwise_gap_example() -> Result<(HypothesisClass, Vec<Vec<LabeledExample>>)> {
    let class = interval_class(5)?;
    let datasets = vec![
        vec![LabeledExample::new(1, true)],
        vec![LabeledExample::new(3, true)],
        vec![LabeledExample::new(2, false)],
    ];
    Ok((class, datasets))
}
