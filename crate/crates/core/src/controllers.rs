//! Control policies: zero control, the distributed H-infinity law with known
//! models, and the distributed minimax adaptive law.
//!
//! All three produce node controls `u_i`; the edge input on `(i, j)` is
//! always `u_i - u_j`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::dynamics::{CandidateSet, UncertainNetwork};
use crate::error::{Error, Result};
use crate::graph::NetworkGraph;

/// Selection tie tolerance on the evidence `q(a)`.
pub const TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct ControlDecision {
    pub node_controls: Vec<f64>,
    pub edge_inputs: Vec<f64>,
}

impl ControlDecision {
    pub fn from_node_controls(graph: &NetworkGraph, node_controls: Vec<f64>) -> Self {
        let edge_inputs = graph
            .edges()
            .iter()
            .map(|&(i, j)| node_controls[i] - node_controls[j])
            .collect();
        Self {
            node_controls,
            edge_inputs,
        }
    }
}

pub fn zero_policy(graph: &NetworkGraph) -> ControlDecision {
    ControlDecision {
        node_controls: vec![0.0; graph.node_count()],
        edge_inputs: vec![0.0; graph.edge_count()],
    }
}

/// Certainty-equivalent H-infinity law for one node: `b x / (a - 1)`.
pub fn hinf_node_control(a: f64, b: f64, x: f64) -> f64 {
    b * x / (a - 1.0)
}

/// H-infinity optimal law `K = B^T (A - I)^{-1}` evaluated node by node.
pub fn hinf_policy(graph: &NetworkGraph, b: f64, x: &[f64], a: &[f64]) -> Result<ControlDecision> {
    graph.check_len(x.len())?;
    graph.check_len(a.len())?;
    let u = x
        .iter()
        .zip(a)
        .map(|(&xi, &ai)| hinf_node_control(ai, b, xi))
        .collect();
    Ok(ControlDecision::from_node_controls(graph, u))
}

/// Per-node evidence accumulator.
///
/// `z` is the running sum of `v v^T` with `v = [-x(t+1), x(t), u_N(t)]`,
/// where `u_N(t)` stacks `u_i - u_j` over the sorted neighbour list.
/// The quadratic form along `[1, a, b 1^T]` is then the disturbance energy
/// model `a` would have needed to explain the data.
#[derive(Debug, Clone, PartialEq)]
pub struct MinimaxNodeState {
    pub node_id: usize,
    pub z: DMatrix<f64>,
    pub selected_index: usize,
}

/// Coefficients of `q(a) = c0 + c1 a + c2 a^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvidenceQuadratic {
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
}

impl EvidenceQuadratic {
    pub fn eval(&self, a: f64) -> f64 {
        self.c0 + a * (self.c1 + a * self.c2)
    }
}

impl MinimaxNodeState {
    pub fn new(node_id: usize, degree: usize) -> Self {
        Self {
            node_id,
            z: DMatrix::zeros(degree + 2, degree + 2),
            selected_index: 0,
        }
    }

    pub fn degree(&self) -> usize {
        self.z.nrows() - 2
    }

    /// Adds the transition `x_t -> x_next` under neighbour differences `u_neighbors`.
    pub fn update(&mut self, x_next: f64, x_t: f64, u_neighbors: &[f64]) -> Result<()> {
        if u_neighbors.len() != self.degree() {
            return Err(Error::DimensionMismatch {
                expected: self.degree(),
                got: u_neighbors.len(),
            });
        }
        let v: Vec<f64> = [-x_next, x_t].into_iter().chain(u_neighbors.iter().copied()).collect();
        let n = v.len();
        for r in 0..n {
            for c in 0..n {
                self.z[(r, c)] += v[r] * v[c];
            }
        }
        Ok(())
    }

    /// Reduces the `(2 + d)`-dimensional quadratic form to three coefficients.
    pub fn evidence(&self, b: f64) -> EvidenceQuadratic {
        let z = &self.z;
        let n = z.nrows();
        let mut row0 = 0.0;
        let mut row1 = 0.0;
        let mut block = 0.0;
        for k in 2..n {
            row0 += z[(0, k)];
            row1 += z[(1, k)];
            for l in 2..n {
                block += z[(k, l)];
            }
        }
        EvidenceQuadratic {
            c0: z[(0, 0)] + 2.0 * b * row0 + b * b * block,
            c1: 2.0 * z[(0, 1)] + 2.0 * b * row1,
            c2: z[(1, 1)],
        }
    }

    /// Full quadratic form `v^T Z v` with `v = [1, a, b 1^T]`.
    pub fn quadratic_form(&self, a: f64, b: f64) -> f64 {
        let n = self.z.nrows();
        let v: Vec<f64> = (0..n)
            .map(|k| match k {
                0 => 1.0,
                1 => a,
                _ => b,
            })
            .collect();
        let mut q = 0.0;
        for r in 0..n {
            for c in 0..n {
                q += v[r] * self.z[(r, c)] * v[c];
            }
        }
        q
    }

    /// Picks the candidate with least evidence and stores it.
    ///
    /// The previous selection is kept when it is within [`TIE_TOLERANCE`] of
    /// the minimum; otherwise the smallest minimising index wins.
    pub fn select(&mut self, candidates: &CandidateSet, b: f64) -> Result<usize> {
        if candidates.is_empty() {
            return Err(Error::InvalidCandidates("empty candidate set".into()));
        }
        let quad = self.evidence(b);
        let scores: Vec<f64> = candidates.values().iter().map(|&a| quad.eval(a)).collect();
        let (best, best_score) = scores
            .iter()
            .copied()
            .enumerate()
            .fold((0, f64::INFINITY), |acc, (k, s)| if s < acc.1 { (k, s) } else { acc });
        let keep = scores
            .get(self.selected_index)
            .is_some_and(|&s| s <= best_score + TIE_TOLERANCE);
        if !keep {
            self.selected_index = best;
        }
        Ok(self.selected_index)
    }
}

/// Free-function form of [`MinimaxNodeState::update`].
pub fn minimax_update(
    state: &mut MinimaxNodeState,
    x_next: f64,
    x_t: f64,
    u_neighbors: &[f64],
) -> Result<()> {
    state.update(x_next, x_t, u_neighbors)
}

/// Free-function form of [`MinimaxNodeState::select`].
pub fn minimax_select(state: &mut MinimaxNodeState, candidates: &CandidateSet, b: f64) -> Result<usize> {
    state.select(candidates, b)
}

/// `u_i = b x_i / (a_sel - 1)` with each node's currently selected candidate.
pub fn minimax_policy(
    graph: &NetworkGraph,
    b: f64,
    x: &[f64],
    states: &[MinimaxNodeState],
    candidates: &[CandidateSet],
) -> Result<ControlDecision> {
    graph.check_len(x.len())?;
    graph.check_len(states.len())?;
    graph.check_len(candidates.len())?;
    let u = x
        .iter()
        .zip(states.iter().zip(candidates))
        .map(|(&xi, (s, c))| {
            let a = c.get(s.selected_index).ok_or(Error::TrueIndexOutOfRange {
                node: s.node_id,
                index: s.selected_index,
                count: c.len(),
            })?;
            Ok(hinf_node_control(a, b, xi))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ControlDecision::from_node_controls(graph, u))
}

/// Neighbour differences `u_i - u_j` over the sorted neighbour list of `node`.
pub fn neighbor_differences(graph: &NetworkGraph, node: usize, node_controls: &[f64]) -> Vec<f64> {
    let ui = node_controls[node];
    graph.neighbors(node).iter().map(|&j| ui - node_controls[j]).collect()
}

/// All node states of the minimax controller for one network.
#[derive(Debug, Clone)]
pub struct MinimaxController {
    states: Vec<MinimaxNodeState>,
}

impl MinimaxController {
    pub fn new(graph: &NetworkGraph) -> Self {
        Self {
            states: (0..graph.node_count())
                .map(|i| MinimaxNodeState::new(i, graph.degree(i)))
                .collect(),
        }
    }

    pub fn states(&self) -> &[MinimaxNodeState] {
        &self.states
    }

    /// Absorbs the transition `x_prev -> x_now` driven by `prev_controls`.
    pub fn observe(
        &mut self,
        graph: &NetworkGraph,
        x_prev: &[f64],
        x_now: &[f64],
        prev_controls: &[f64],
    ) -> Result<()> {
        graph.check_len(x_prev.len())?;
        graph.check_len(x_now.len())?;
        graph.check_len(prev_controls.len())?;
        for (i, state) in self.states.iter_mut().enumerate() {
            let diffs = neighbor_differences(graph, i, prev_controls);
            state.update(x_now[i], x_prev[i], &diffs)?;
        }
        Ok(())
    }

    pub fn select(&mut self, net: &UncertainNetwork) -> Result<Vec<usize>> {
        self.states
            .iter_mut()
            .zip(net.candidates())
            .map(|(s, c)| s.select(c, net.b()))
            .collect()
    }

    pub fn selections(&self) -> Vec<usize> {
        self.states.iter().map(|s| s.selected_index).collect()
    }

    pub fn decide(&self, net: &UncertainNetwork, x: &[f64]) -> Result<ControlDecision> {
        minimax_policy(net.graph(), net.b(), x, &self.states, net.candidates())
    }
}
