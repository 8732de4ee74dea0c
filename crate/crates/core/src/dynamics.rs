//! The uncertain networked plant
//! `x_i(t+1) = a_i x_i(t) + b * sum_{j in N_i} (u_i(t) - u_j(t)) + w_i(t)`.
//!
//! Each node's `a_i` is one of a finite candidate set; the network carries
//! the index of the true value per node, which controllers never read
//! except for the H-infinity baseline.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{GraphRecord, NetworkGraph};

/// Open interval of `a` satisfying `a^2 + 2 b^2 d < a`.
pub fn admissible_interval(b: f64, degree: usize) -> Result<(f64, f64)> {
    if !(b > 0.0) || degree == 0 {
        return Err(Error::InvalidParameter(format!(
            "need b > 0 and degree >= 1, got b = {b}, degree = {degree}"
        )));
    }
    let disc = 0.25 - 2.0 * b * b * degree as f64;
    if !(disc > 0.0) {
        return Err(Error::GainTooLarge {
            b,
            degree,
            limit: gain_limit(degree),
        });
    }
    let r = disc.sqrt();
    Ok((0.5 - r, 0.5 + r))
}

/// `sqrt(1 / (8 d))`, the exclusive upper limit on `b` for degree `d`.
pub fn gain_limit(degree: usize) -> f64 {
    (1.0 / (8.0 * degree as f64)).sqrt()
}

/// Strict local admissibility `a^2 + 2 b^2 d < a`, no tolerance.
pub fn is_admissible(a: f64, b: f64, degree: usize) -> bool {
    a * a + 2.0 * b * b * (degree as f64) < a
}

/// Finite set of candidate values for one node's local parameter, sorted ascending.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct CandidateSet {
    values: Vec<f64>,
}

impl CandidateSet {
    pub fn new(mut values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidCandidates("empty candidate set".into()));
        }
        if let Some(bad) = values.iter().find(|a| !(**a > 0.0 && **a < 1.0)) {
            return Err(Error::InvalidCandidates(format!(
                "candidate {bad} outside (0, 1)"
            )));
        }
        values.sort_by(f64::total_cmp);
        if values.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidCandidates("duplicate candidate values".into()));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, index: usize) -> Option<f64> {
        self.values.get(index).copied()
    }

    pub fn min(&self) -> f64 {
        self.values[0]
    }

    pub fn max(&self) -> f64 {
        self.values[self.values.len() - 1]
    }
}

impl TryFrom<Vec<f64>> for CandidateSet {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        Self::new(values)
    }
}

impl From<CandidateSet> for Vec<f64> {
    fn from(c: CandidateSet) -> Self {
        c.values
    }
}

const MAX_SAMPLING_ATTEMPTS: usize = 10_000;

/// Draws `count` candidates uniformly over the admissible interval with
/// pairwise gaps of at least `separation`.
pub fn sample_candidates(
    b: f64,
    degree: usize,
    count: usize,
    seed: u64,
    separation: f64,
) -> Result<CandidateSet> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_candidates_with(&mut rng, b, degree, count, separation)
}

pub fn sample_candidates_with<R: Rng>(
    rng: &mut R,
    b: f64,
    degree: usize,
    count: usize,
    separation: f64,
) -> Result<CandidateSet> {
    if count == 0 {
        return Err(Error::InvalidParameter("candidate count must be >= 1".into()));
    }
    if !(separation >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "separation must be non-negative, got {separation}"
        )));
    }
    let (lo, hi) = admissible_interval(b, degree)?;
    if count as f64 * separation >= hi - lo {
        return Err(Error::SeparationUnsatisfiable {
            count,
            separation,
            attempts: 0,
        });
    }
    for _ in 0..MAX_SAMPLING_ATTEMPTS {
        let mut values: Vec<f64> = (0..count)
            .map(|_| loop {
                let a = rng.random_range(lo..hi);
                if is_admissible(a, b, degree) {
                    break a;
                }
            })
            .collect();
        values.sort_by(f64::total_cmp);
        if values.windows(2).all(|w| w[1] - w[0] >= separation && w[1] > w[0]) {
            return CandidateSet::new(values);
        }
    }
    Err(Error::SeparationUnsatisfiable {
        count,
        separation,
        attempts: MAX_SAMPLING_ATTEMPTS,
    })
}

/// How the hidden true model is chosen per node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum TrueModelRule {
    /// Same index at every node.
    Fixed { index: usize },
    /// Explicit index per node.
    PerNode { indices: Vec<usize> },
    /// Independent uniform draw per node.
    Random { seed: u64 },
}

impl TrueModelRule {
    pub fn resolve(&self, candidates: &[CandidateSet]) -> Result<Vec<usize>> {
        match self {
            TrueModelRule::Fixed { index } => Ok(vec![*index; candidates.len()]),
            TrueModelRule::PerNode { indices } => {
                if indices.len() != candidates.len() {
                    return Err(Error::DimensionMismatch {
                        expected: candidates.len(),
                        got: indices.len(),
                    });
                }
                Ok(indices.clone())
            }
            TrueModelRule::Random { seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                Ok(candidates
                    .iter()
                    .map(|c| rng.random_range(0..c.len()))
                    .collect())
            }
        }
    }
}

/// One failed admissibility check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    /// `a^2 + 2 b^2 d < a` fails for a candidate at a node.
    LocalCondition {
        node: usize,
        value: f64,
        degree: usize,
    },
    /// `b < sqrt(1 / (8 d_max))` fails.
    GainBound {
        b: f64,
        max_degree: usize,
        limit: f64,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::LocalCondition {
                node,
                value,
                degree,
            } => write!(
                f,
                "node {node}: candidate a = {value} violates a^2 + 2 b^2 d < a (d = {degree})"
            ),
            Violation::GainBound {
                b,
                max_degree,
                limit,
            } => write!(
                f,
                "b = {b} violates b < sqrt(1/(8 d_max)) = {limit} (d_max = {max_degree})"
            ),
        }
    }
}

/// Graph, edge gain, per-node candidate sets and the hidden true model indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "NetworkRecord", into = "NetworkRecord")]
pub struct UncertainNetwork {
    graph: NetworkGraph,
    b: f64,
    candidates: Vec<CandidateSet>,
    true_index: Vec<usize>,
}

/// On-disk form of an [`UncertainNetwork`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NetworkRecord {
    #[serde(flatten)]
    pub graph: GraphRecord,
    pub b: f64,
    pub candidates: Vec<CandidateSet>,
    pub true_index: Vec<usize>,
}

impl TryFrom<NetworkRecord> for UncertainNetwork {
    type Error = Error;

    fn try_from(r: NetworkRecord) -> Result<Self> {
        UncertainNetwork::new(NetworkGraph::try_from(r.graph)?, r.b, r.candidates, r.true_index)
    }
}

impl From<UncertainNetwork> for NetworkRecord {
    fn from(n: UncertainNetwork) -> Self {
        NetworkRecord {
            graph: n.graph.into(),
            b: n.b,
            candidates: n.candidates,
            true_index: n.true_index,
        }
    }
}

impl UncertainNetwork {
    /// Checks structure only (sizes, index ranges, `b > 0`). Use
    /// [`UncertainNetwork::validate`] for the admissibility conditions.
    pub fn new(
        graph: NetworkGraph,
        b: f64,
        candidates: Vec<CandidateSet>,
        true_index: Vec<usize>,
    ) -> Result<Self> {
        if !(b > 0.0 && b.is_finite()) {
            return Err(Error::InvalidParameter(format!("b must be positive, got {b}")));
        }
        let n = graph.node_count();
        for len in [candidates.len(), true_index.len()] {
            if len != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: len,
                });
            }
        }
        for (node, (&index, set)) in true_index.iter().zip(&candidates).enumerate() {
            if index >= set.len() {
                return Err(Error::TrueIndexOutOfRange {
                    node,
                    index,
                    count: set.len(),
                });
            }
        }
        Ok(Self {
            graph,
            b,
            candidates,
            true_index,
        })
    }

    /// Samples `count` admissible candidates per node. Node `i` draws from
    /// stream `i` of a generator seeded with `seed`.
    pub fn sample(
        graph: NetworkGraph,
        b: f64,
        count: usize,
        separation: f64,
        seed: u64,
        truth: &TrueModelRule,
    ) -> Result<Self> {
        let candidates = (0..graph.node_count())
            .map(|node| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(node as u64);
                sample_candidates_with(&mut rng, b, graph.degree(node), count, separation)
            })
            .collect::<Result<Vec<_>>>()?;
        let true_index = truth.resolve(&candidates)?;
        Self::new(graph, b, candidates, true_index)
    }

    pub fn graph(&self) -> &NetworkGraph {
        &self.graph
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn node_count(&self) -> usize {
        self.graph.node_count()
    }

    pub fn candidates(&self) -> &[CandidateSet] {
        &self.candidates
    }

    pub fn true_index(&self) -> &[usize] {
        &self.true_index
    }

    /// The realised parameter vector `a_true`.
    pub fn true_parameters(&self) -> Vec<f64> {
        self.candidates
            .iter()
            .zip(&self.true_index)
            .map(|(c, &k)| c.values()[k])
            .collect()
    }

    /// Per-node largest candidate (the diagonal of the upper extreme model).
    pub fn upper_parameters(&self) -> Vec<f64> {
        self.candidates.iter().map(CandidateSet::max).collect()
    }

    pub fn lower_parameters(&self) -> Vec<f64> {
        self.candidates.iter().map(CandidateSet::min).collect()
    }

    /// Network-wide largest candidate.
    pub fn a_max(&self) -> f64 {
        self.candidates.iter().map(CandidateSet::max).fold(f64::MIN, f64::max)
    }

    /// Network-wide smallest candidate.
    pub fn a_min(&self) -> f64 {
        self.candidates.iter().map(CandidateSet::min).fold(f64::MAX, f64::min)
    }

    /// Returns a copy with different true indices.
    pub fn with_true_index(&self, true_index: Vec<usize>) -> Result<Self> {
        Self::new(self.graph.clone(), self.b, self.candidates.clone(), true_index)
    }

    /// Every admissibility failure; empty iff the network is valid.
    pub fn validate(&self) -> Vec<Violation> {
        let mut violations = Vec::new();
        let max_degree = self.graph.max_degree();
        if !(8.0 * self.b * self.b * (max_degree as f64) < 1.0) {
            violations.push(Violation::GainBound {
                b: self.b,
                max_degree,
                limit: gain_limit(max_degree),
            });
        }
        for (node, set) in self.candidates.iter().enumerate() {
            let degree = self.graph.degree(node);
            for &value in set.values() {
                if !is_admissible(value, self.b, degree) {
                    violations.push(Violation::LocalCondition {
                        node,
                        value,
                        degree,
                    });
                }
            }
        }
        violations
    }

    pub fn ensure_valid(&self) -> Result<()> {
        let violations = self.validate();
        if violations.is_empty() {
            Ok(())
        } else {
            Err(Error::Inadmissible(violations))
        }
    }
}

/// Free-function form of [`UncertainNetwork::validate`].
pub fn validate_network(net: &UncertainNetwork) -> Vec<Violation> {
    net.validate()
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkState {
    pub x: Vec<f64>,
    pub t: usize,
}

impl NetworkState {
    pub fn new(x: Vec<f64>) -> Self {
        Self { x, t: 0 }
    }
}

/// One node update: `a x_i + b * edge_diff_sum + w_i`.
pub fn step_node(a: f64, b: f64, x_i: f64, edge_diff_sum: f64, w_i: f64) -> f64 {
    a * x_i + b * edge_diff_sum + w_i
}

/// `sum_{j in N_i} (u_i - u_j)` for node controls `u`.
pub fn edge_diff_sum(graph: &NetworkGraph, node: usize, node_controls: &[f64]) -> f64 {
    let ui = node_controls[node];
    graph.neighbors(node).iter().map(|&j| ui - node_controls[j]).sum()
}

/// Per-node stepping from node controls, each node reading only its neighbours.
pub fn step_network_distributed(
    net: &UncertainNetwork,
    a: &[f64],
    x: &[f64],
    node_controls: &[f64],
    w: &[f64],
) -> Result<Vec<f64>> {
    let g = net.graph();
    for len in [a.len(), x.len(), node_controls.len(), w.len()] {
        g.check_len(len)?;
    }
    Ok((0..g.node_count())
        .map(|i| step_node(a[i], net.b(), x[i], edge_diff_sum(g, i, node_controls), w[i]))
        .collect())
}

/// Centralised form `A x + B u + w` with `A = diag(a_true)` and `B = b * incidence`.
pub fn step_network_compact(
    net: &UncertainNetwork,
    x: &[f64],
    edge_inputs: &[f64],
    w: &[f64],
) -> Result<Vec<f64>> {
    let g = net.graph();
    g.check_len(x.len())?;
    g.check_len(w.len())?;
    let bu = g.incidence_apply(edge_inputs)?;
    let a = net.true_parameters();
    Ok((0..g.node_count())
        .map(|i| a[i] * x[i] + net.b() * bu[i] + w[i])
        .collect())
}

/// Disturbance implied by model `a`: `x_next - a x_t - b * edge_diff_sum`.
pub fn infer_disturbance(a: f64, b: f64, x_t: f64, edge_diff_sum: f64, x_next: f64) -> f64 {
    x_next - (a * x_t + b * edge_diff_sum)
}
