//! Network topology.
//!
//! A [`NetworkGraph`] is an undirected graph whose edges carry a fixed
//! orientation `(i, j)`. The orientation decides the incidence signs: an
//! edge input enters its source node `i` with `+1` and its sink `j` with
//! `-1`. Graphs are immutable once built.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GraphRecord", into = "GraphRecord")]
pub struct NetworkGraph {
    node_count: usize,
    edges: Vec<(usize, usize)>,
    neighbors: Vec<Vec<usize>>,
    /// Per node, `(edge index, sign)` for every incident edge.
    incident: Vec<Vec<(usize, f64)>>,
}

/// On-disk form: `{ "n": .., "edges": [[i, j], ..] }`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GraphRecord {
    pub n: usize,
    pub edges: Vec<[usize; 2]>,
}

impl TryFrom<GraphRecord> for NetworkGraph {
    type Error = Error;

    fn try_from(record: GraphRecord) -> Result<Self> {
        NetworkGraph::new(record.n, record.edges.iter().map(|e| (e[0], e[1])).collect())
    }
}

impl From<NetworkGraph> for GraphRecord {
    fn from(g: NetworkGraph) -> Self {
        GraphRecord {
            n: g.node_count,
            edges: g.edges.iter().map(|&(i, j)| [i, j]).collect(),
        }
    }
}

/// Signed column of the incidence matrix: `+1` at the source, `-1` at the sink.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IncidenceColumn {
    pub len: usize,
    pub source: usize,
    pub sink: usize,
}

impl IncidenceColumn {
    pub fn entries(&self) -> [(usize, f64); 2] {
        [(self.source, 1.0), (self.sink, -1.0)]
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut v = vec![0.0; self.len];
        v[self.source] = 1.0;
        v[self.sink] = -1.0;
        v
    }
}

impl NetworkGraph {
    /// Builds a graph from an oriented edge list.
    ///
    /// Rejects self-loops, duplicate edges (in either orientation), node ids
    /// out of range and isolated nodes.
    pub fn new(node_count: usize, edges: Vec<(usize, usize)>) -> Result<Self> {
        if node_count < 2 {
            return Err(Error::TooFewNodes {
                min: 2,
                got: node_count,
            });
        }
        let mut seen = HashSet::with_capacity(edges.len());
        let mut neighbors = vec![Vec::new(); node_count];
        let mut incident = vec![Vec::new(); node_count];
        for (e, &(i, j)) in edges.iter().enumerate() {
            if i >= node_count || j >= node_count {
                return Err(Error::NodeOutOfRange(i, j));
            }
            if i == j {
                return Err(Error::SelfLoop(i));
            }
            if !seen.insert((i.min(j), i.max(j))) {
                return Err(Error::DuplicateEdge(i, j));
            }
            neighbors[i].push(j);
            neighbors[j].push(i);
            incident[i].push((e, 1.0));
            incident[j].push((e, -1.0));
        }
        if let Some(node) = neighbors.iter().position(Vec::is_empty) {
            return Err(Error::IsolatedNode(node));
        }
        for list in &mut neighbors {
            list.sort_unstable();
        }
        Ok(Self {
            node_count,
            edges,
            neighbors,
            incident,
        })
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Sorted neighbor ids of `node`.
    pub fn neighbors(&self, node: usize) -> &[usize] {
        &self.neighbors[node]
    }

    pub fn degree(&self, node: usize) -> usize {
        self.neighbors[node].len()
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.neighbors.iter().map(Vec::len).collect()
    }

    pub fn max_degree(&self) -> usize {
        self.neighbors.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Incident edges of `node` with the sign the edge input enters with.
    pub fn incident_edges(&self, node: usize) -> &[(usize, f64)] {
        &self.incident[node]
    }

    pub fn incidence_column(&self, edge: usize) -> Result<IncidenceColumn> {
        let &(source, sink) = self.edges.get(edge).ok_or(Error::EdgeOutOfRange {
            index: edge,
            count: self.edges.len(),
        })?;
        Ok(IncidenceColumn {
            len: self.node_count,
            source,
            sink,
        })
    }

    /// `L x` with `(L x)_i = sum over neighbors j of (x_i - x_j)`.
    pub fn laplacian_apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_len(x.len())?;
        Ok(self
            .neighbors
            .iter()
            .enumerate()
            .map(|(i, nbrs)| nbrs.iter().map(|&j| x[i] - x[j]).sum())
            .collect())
    }

    /// Incidence matrix times an edge vector: `(I u)_i = sum of signed incident entries`.
    pub fn incidence_apply(&self, edge_values: &[f64]) -> Result<Vec<f64>> {
        if edge_values.len() != self.edges.len() {
            return Err(Error::DimensionMismatch {
                expected: self.edges.len(),
                got: edge_values.len(),
            });
        }
        let mut out = vec![0.0; self.node_count];
        for (&(i, j), &u) in self.edges.iter().zip(edge_values) {
            out[i] += u;
            out[j] -= u;
        }
        Ok(out)
    }

    /// Per-edge differences `x_i - x_j` for each oriented edge `(i, j)`.
    pub fn edge_differences(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_len(x.len())?;
        Ok(self.edges.iter().map(|&(i, j)| x[i] - x[j]).collect())
    }

    pub(crate) fn check_len(&self, len: usize) -> Result<()> {
        if len != self.node_count {
            return Err(Error::DimensionMismatch {
                expected: self.node_count,
                got: len,
            });
        }
        Ok(())
    }

    /// True when the edge set is acyclic and spans every node.
    pub fn is_tree(&self) -> bool {
        if self.edges.len() + 1 != self.node_count {
            return false;
        }
        let mut seen = vec![false; self.node_count];
        let mut stack = vec![0];
        seen[0] = true;
        let mut visited = 1;
        while let Some(v) = stack.pop() {
            for &u in &self.neighbors[v] {
                if !seen[u] {
                    seen[u] = true;
                    visited += 1;
                    stack.push(u);
                }
            }
        }
        visited == self.node_count
    }
}

/// Uniform random labelled tree on `n` nodes, decoded from a random Prüfer sequence.
pub fn generate_tree(n: usize, seed: u64) -> Result<NetworkGraph> {
    if n < 2 {
        return Err(Error::TooFewNodes { min: 2, got: n });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sequence: Vec<usize> = (0..n - 2).map(|_| rng.random_range(0..n)).collect();
    NetworkGraph::new(n, prufer_decode(n, &sequence))
}

fn prufer_decode(n: usize, sequence: &[usize]) -> Vec<(usize, usize)> {
    let mut remaining = vec![1usize; n];
    for &v in sequence {
        remaining[v] += 1;
    }
    let mut leaves: BinaryHeap<Reverse<usize>> =
        (0..n).filter(|&v| remaining[v] == 1).map(Reverse).collect();
    let mut edges = Vec::with_capacity(n - 1);
    for &v in sequence {
        let Reverse(leaf) = leaves.pop().expect("a Prüfer sequence always leaves a leaf");
        edges.push((leaf.min(v), leaf.max(v)));
        remaining[v] -= 1;
        if remaining[v] == 1 {
            leaves.push(Reverse(v));
        }
    }
    let Reverse(u) = leaves.pop().expect("two leaves remain");
    let Reverse(w) = leaves.pop().expect("two leaves remain");
    edges.push((u.min(w), u.max(w)));
    edges
}

/// Path graph with edges `(k, k + 1)`.
pub fn generate_line(n: usize) -> Result<NetworkGraph> {
    if n < 2 {
        return Err(Error::TooFewNodes { min: 2, got: n });
    }
    NetworkGraph::new(n, (0..n - 1).map(|k| (k, k + 1)).collect())
}

/// Star graph centred at node 0 with edges `(0, k)`.
pub fn generate_star(n: usize) -> Result<NetworkGraph> {
    if n < 2 {
        return Err(Error::TooFewNodes { min: 2, got: n });
    }
    NetworkGraph::new(n, (1..n).map(|k| (0, k)).collect())
}
