//! Sparse symmetric matrices, LDL^T factorisation and a smallest-eigenvalue solver.
//!
//! The factorisation eliminates in a greedy minimum-degree order, so tree
//! patterns factor leaf-first without fill. No pivoting is done; the pivot
//! signs give the inertia of the (possibly shifted) matrix, which is used
//! to bracket the smallest eigenvalue before shifted inverse iteration.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};

use crate::error::{Error, Result};
use crate::graph::NetworkGraph;

#[derive(Debug, Clone, PartialEq)]
pub struct SparseSymmetric {
    n: usize,
    diag: Vec<f64>,
    /// Upper-triangle off-diagonal entries `(i, j, value)` with `i < j`.
    off: Vec<(usize, usize, f64)>,
}

impl SparseSymmetric {
    pub fn new(diag: Vec<f64>, off: Vec<(usize, usize, f64)>) -> Result<Self> {
        let n = diag.len();
        let mut merged: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for (i, j, v) in off {
            if i >= n || j >= n {
                return Err(Error::NodeOutOfRange(i, j));
            }
            if i == j {
                return Err(Error::InvalidParameter("off-diagonal entry on the diagonal".into()));
            }
            *merged.entry((i.min(j), i.max(j))).or_insert(0.0) += v;
        }
        Ok(Self {
            n,
            diag,
            off: merged.into_iter().map(|((i, j), v)| (i, j, v)).collect(),
        })
    }

    /// `diag(extra) + weight * L` for the graph Laplacian `L`.
    pub fn from_graph(graph: &NetworkGraph, extra: &[f64], weight: f64) -> Result<Self> {
        graph.check_len(extra.len())?;
        let diag = (0..graph.node_count())
            .map(|i| extra[i] + weight * graph.degree(i) as f64)
            .collect();
        let off = graph.edges().iter().map(|&(i, j)| (i, j, -weight)).collect();
        Self::new(diag, off)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.diag
    }

    pub fn off_diagonal(&self) -> &[(usize, usize, f64)] {
        &self.off
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y: Vec<f64> = self.diag.iter().zip(x).map(|(d, v)| d * v).collect();
        for &(i, j, v) in &self.off {
            y[i] += v * x[j];
            y[j] += v * x[i];
        }
        y
    }

    /// Gershgorin lower bound on the spectrum.
    pub fn gershgorin_lower(&self) -> f64 {
        let mut radius = vec![0.0; self.n];
        for &(i, j, v) in &self.off {
            radius[i] += v.abs();
            radius[j] += v.abs();
        }
        self.diag
            .iter()
            .zip(&radius)
            .map(|(d, r)| d - r)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut m = nalgebra::DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&self.diag));
        for &(i, j, v) in &self.off {
            m[(i, j)] += v;
            m[(j, i)] += v;
        }
        m
    }

    fn adjacency(&self) -> Vec<BTreeSet<usize>> {
        let mut adj = vec![BTreeSet::new(); self.n];
        for &(i, j, _) in &self.off {
            adj[i].insert(j);
            adj[j].insert(i);
        }
        adj
    }
}

/// Greedy minimum-degree elimination order on the symbolic pattern.
pub fn minimum_degree_order(m: &SparseSymmetric) -> Vec<usize> {
    let mut adj = m.adjacency();
    let mut done = vec![false; m.n];
    let mut heap: BinaryHeap<Reverse<(usize, usize)>> =
        (0..m.n).map(|v| Reverse((adj[v].len(), v))).collect();
    let mut order = Vec::with_capacity(m.n);
    while let Some(Reverse((deg, v))) = heap.pop() {
        if done[v] || deg != adj[v].len() {
            continue;
        }
        done[v] = true;
        order.push(v);
        let nbrs: Vec<usize> = std::mem::take(&mut adj[v]).into_iter().collect();
        for &u in &nbrs {
            adj[u].remove(&v);
        }
        for (k, &p) in nbrs.iter().enumerate() {
            for &q in &nbrs[k + 1..] {
                adj[p].insert(q);
                adj[q].insert(p);
            }
        }
        for &u in &nbrs {
            heap.push(Reverse((adj[u].len(), u)));
        }
    }
    order
}

/// `P (M - shift I) P^T = L D L^T` in a fixed elimination order.
#[derive(Debug, Clone)]
pub struct LdlFactor {
    order: Vec<usize>,
    pivots: Vec<f64>,
    /// Column of `L` for each eliminated node: `(row node, multiplier)`.
    columns: Vec<Vec<(usize, f64)>>,
}

impl LdlFactor {
    pub fn factor(m: &SparseSymmetric, order: &[usize], shift: f64) -> Self {
        let n = m.n;
        let mut rows: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); n];
        for &(i, j, v) in &m.off {
            rows[i].insert(j, v);
            rows[j].insert(i, v);
        }
        let mut diag: Vec<f64> = m.diag.iter().map(|d| d - shift).collect();
        let scale = m.diag.iter().fold(shift.abs(), |s, d| s.max(d.abs())).max(f64::MIN_POSITIVE);
        let tiny = f64::EPSILON * scale;

        let mut pivots = Vec::with_capacity(n);
        let mut columns = Vec::with_capacity(n);
        for &k in order {
            let mut d = diag[k];
            if d.abs() < tiny {
                // an exact zero pivot means an eigenvalue at the shift; nudge so counting stays defined
                d = if d < 0.0 { -tiny } else { tiny };
            }
            let entries: Vec<(usize, f64)> = std::mem::take(&mut rows[k]).into_iter().collect();
            for &(j, _) in &entries {
                rows[j].remove(&k);
            }
            let col: Vec<(usize, f64)> = entries.iter().map(|&(j, v)| (j, v / d)).collect();
            for (p, &(i, li)) in col.iter().enumerate() {
                diag[i] -= li * d * li;
                for &(j, lj) in &col[p + 1..] {
                    let delta = li * d * lj;
                    *rows[i].entry(j).or_insert(0.0) -= delta;
                    *rows[j].entry(i).or_insert(0.0) -= delta;
                }
            }
            pivots.push(d);
            columns.push(col);
        }
        Self {
            order: order.to_vec(),
            pivots,
            columns,
        }
    }

    /// Number of eigenvalues of `M` strictly below the shift (Sylvester inertia).
    pub fn negative_pivots(&self) -> usize {
        self.pivots.iter().filter(|&&d| d < 0.0).count()
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let mut y = rhs.to_vec();
        for (&k, col) in self.order.iter().zip(&self.columns) {
            let yk = y[k];
            for &(j, l) in col {
                y[j] -= l * yk;
            }
        }
        for (&k, &d) in self.order.iter().zip(&self.pivots) {
            y[k] /= d;
        }
        for (&k, col) in self.order.iter().zip(&self.columns).rev() {
            let mut acc = y[k];
            for &(j, l) in col {
                acc -= l * y[j];
            }
            y[k] = acc;
        }
        y
    }
}

#[derive(Debug, Clone)]
pub struct EigenEstimate {
    pub value: f64,
    pub vector: Vec<f64>,
    /// Inverse-iteration steps taken after bracketing.
    pub iterations: usize,
}

pub const EIGEN_TOLERANCE: f64 = 1e-10;
pub const EIGEN_MAX_ITERATIONS: usize = 10_000;

/// Smallest eigenvalue of a sparse symmetric matrix.
///
/// Brackets the eigenvalue by bisection on inertia counts, then runs
/// inverse iteration shifted just below the bracket. The returned value is
/// the Rayleigh quotient of the converged vector.
pub fn smallest_eigenvalue(m: &SparseSymmetric) -> Result<EigenEstimate> {
    smallest_eigenvalue_with(m, EIGEN_TOLERANCE, EIGEN_MAX_ITERATIONS)
}

pub fn smallest_eigenvalue_with(
    m: &SparseSymmetric,
    tolerance: f64,
    max_iterations: usize,
) -> Result<EigenEstimate> {
    let n = m.n;
    if n == 0 {
        return Err(Error::InvalidParameter("empty matrix".into()));
    }
    let order = minimum_degree_order(m);
    let count_below = |shift: f64| LdlFactor::factor(m, &order, shift).negative_pivots();

    // Any diagonal entry is a Rayleigh quotient, hence an upper bound.
    let mut hi = m.diag.iter().copied().fold(f64::INFINITY, f64::min);
    let mut lo = m.gershgorin_lower().min(hi);
    let scale = m.diag.iter().fold(0.0f64, |s, d| s.max(d.abs())).max(f64::MIN_POSITIVE);
    let mut widen = scale.max(hi.abs()) * f64::EPSILON;
    while count_below(lo) > 0 {
        widen *= 2.0;
        lo -= widen.max(1e-300);
    }
    if count_below(hi) == 0 {
        // lambda_min equals hi up to rounding
        hi += hi.abs() * 4.0 * f64::EPSILON + f64::MIN_POSITIVE;
    }
    let mut guard = 0;
    let floor = scale * f64::EPSILON.sqrt();
    while hi - lo > tolerance * hi.abs().max(lo.abs()).max(floor) && guard < 200 {
        let mid = 0.5 * (lo + hi);
        if count_below(mid) > 0 {
            hi = mid;
        } else {
            lo = mid;
        }
        guard += 1;
    }

    let shift = lo - (hi - lo);
    let factor = LdlFactor::factor(m, &order, shift);
    let mut v = vec![1.0 / (n as f64).sqrt(); n];
    let mut rayleigh = f64::NAN;
    for it in 1..=max_iterations {
        let mut next = factor.solve(&v);
        let norm = next.iter().map(|a| a * a).sum::<f64>().sqrt();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::Singular("inverse iteration broke down".into()));
        }
        next.iter_mut().for_each(|a| *a /= norm);
        let mv = m.apply(&next);
        let q: f64 = next.iter().zip(&mv).map(|(a, b)| a * b).sum();
        let converged = (q - rayleigh).abs() <= tolerance * q.abs().max(floor);
        rayleigh = q;
        v = next;
        if converged {
            return Ok(EigenEstimate {
                value: rayleigh,
                vector: v,
                iterations: it,
            });
        }
    }
    Err(Error::NoConvergence {
        iterations: max_iterations,
    })
}

/// Number of eigenvalues of `m` strictly below `shift`.
pub fn count_eigenvalues_below(m: &SparseSymmetric, shift: f64) -> usize {
    let order = minimum_degree_order(m);
    LdlFactor::factor(m, &order, shift).negative_pivots()
}
