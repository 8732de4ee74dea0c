//! l2-gain certificates for the networked plant.
//!
//! * [`zero_control_gain`]: per-node gain with no control input.
//! * [`gamma_lower`]: lower bound from the H-infinity law with the largest
//!   candidate at every node, `lambda_min((A_max - I)^2 + b^2 L)^{-1/2}`.
//! * [`riccati_residual`]: certifies `P = (I - A)^{-1}` against the
//!   H-infinity Riccati inequality for a given gamma.
//! * [`gamma_closed_form`]: the bound for a homogeneous network `A = a I`.
//! * [`gamma_upper`]: upper bound from the cubic in `beta = gamma^2`.

pub mod cubic;
pub mod sparse;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

pub use cubic::{cubic_coefficients, gamma_upper, real_polynomial_roots, CubicCoefficients, UpperBound};
pub use sparse::{smallest_eigenvalue, SparseSymmetric};

use crate::dynamics::{admissible_interval, UncertainNetwork};
use crate::error::{Error, Result};
use crate::graph::NetworkGraph;

/// Bound on a single node's gain with zero input:
/// `1 / (1 - (1/2 + sqrt(1/4 - 2 b^2 d)))`.
pub fn zero_control_gain(b: f64, degree: usize) -> Result<f64> {
    let (_, hi) = admissible_interval(b, degree)?;
    Ok(1.0 / (1.0 - hi))
}

/// `(A - I)^2 + b^2 L` as a sparse matrix.
pub fn hinf_gain_matrix(a: &[f64], graph: &NetworkGraph, b: f64) -> Result<SparseSymmetric> {
    let extra: Vec<f64> = a.iter().map(|ai| (ai - 1.0) * (ai - 1.0)).collect();
    SparseSymmetric::from_graph(graph, &extra, b * b)
}

/// Closed-loop gain of the H-infinity law for known `A = diag(a)`:
/// `|| ((A - I)^2 + B B^T)^{-1} ||^{1/2}`.
pub fn hinf_gain(a: &[f64], graph: &NetworkGraph, b: f64) -> Result<f64> {
    let m = hinf_gain_matrix(a, graph, b)?;
    let lambda = smallest_eigenvalue(&m)?.value;
    if !(lambda > 0.0) {
        return Err(Error::Singular(format!(
            "(A - I)^2 + b^2 L has smallest eigenvalue {lambda}"
        )));
    }
    Ok(lambda.powf(-0.5))
}

/// Dense-eigendecomposition version of [`hinf_gain`], for small networks.
pub fn hinf_gain_dense(a: &[f64], graph: &NetworkGraph, b: f64) -> Result<f64> {
    let m = hinf_gain_matrix(a, graph, b)?.to_dense();
    let lambda = m.symmetric_eigenvalues().min();
    if !(lambda > 0.0) {
        return Err(Error::Singular(format!(
            "(A - I)^2 + b^2 L has smallest eigenvalue {lambda}"
        )));
    }
    Ok(lambda.powf(-0.5))
}

/// Lower bound on the adaptive controller's gain: the H-infinity gain
/// with every node at its largest candidate.
pub fn gamma_lower(net: &UncertainNetwork) -> Result<f64> {
    hinf_gain(&net.upper_parameters(), net.graph(), net.b())
}

pub fn gamma_lower_dense(net: &UncertainNetwork) -> Result<f64> {
    hinf_gain_dense(&net.upper_parameters(), net.graph(), net.b())
}

/// `1 - max(a) > gamma^{-2}`.
pub fn margin_check(a_values: &[f64], gamma: f64) -> bool {
    let a_max = a_values.iter().copied().fold(f64::MIN, f64::max);
    gamma > 0.0 && 1.0 - a_max > gamma.powi(-2)
}

fn dense_laplacian(graph: &NetworkGraph) -> DMatrix<f64> {
    let n = graph.node_count();
    let mut l = DMatrix::zeros(n, n);
    for &(i, j) in graph.edges() {
        l[(i, i)] += 1.0;
        l[(j, j)] += 1.0;
        l[(i, j)] -= 1.0;
        l[(j, i)] -= 1.0;
    }
    l
}

/// Smallest eigenvalue of the Riccati slack
/// `P - I - K^T K - (A + B K)^T (P^{-1} - gamma^{-2} I)^{-1} (A + B K)`
/// with `P = (I - A)^{-1}` and `K = B^T (A - I)^{-1}`. Non-negative certifies
/// the inequality. Dense, so keep `N` to a few hundred.
pub fn riccati_residual(a_values: &[f64], graph: &NetworkGraph, b: f64, gamma: f64) -> Result<f64> {
    graph.check_len(a_values.len())?;
    if !margin_check(a_values, gamma) {
        return Err(Error::InvalidParameter(format!(
            "need 1 - max(a) > gamma^-2 for gamma = {gamma}"
        )));
    }
    let n = graph.node_count();
    let bbt = dense_laplacian(graph) * (b * b);
    let inv_a_minus_i = DVector::from_iterator(n, a_values.iter().map(|a| 1.0 / (a - 1.0)));
    let d = DMatrix::from_diagonal(&inv_a_minus_i);
    let p = DMatrix::from_diagonal(&DVector::from_iterator(n, a_values.iter().map(|a| 1.0 / (1.0 - a))));
    let ktk = &d * &bbt * &d;
    let closed = DMatrix::from_diagonal(&DVector::from_column_slice(a_values)) + &bbt * &d;
    let g2 = gamma.powi(-2);
    let s_inv = DMatrix::from_diagonal(&DVector::from_iterator(
        n,
        a_values.iter().map(|a| 1.0 / (1.0 - a - g2)),
    ));
    let slack = p - DMatrix::identity(n, n) - ktk - closed.transpose() * s_inv * &closed;
    let sym = (&slack + slack.transpose()) * 0.5;
    Ok(sym.symmetric_eigenvalues().min())
}

/// Networks up to this size use the dense path in [`gamma_closed_form`].
pub const CLOSED_FORM_DENSE_LIMIT: usize = 200;

/// Bound for a homogeneous network `A = a_bar I`:
/// `|| G ((1 - a_bar) G - F)^{-1} ||^{1/2}` with
/// `G = ((1 - a_bar) a_bar I - B B^T) / (1 - a_bar)^2` and
/// `F = (a_bar I + B B^T / (a_bar - 1))^2`.
pub fn gamma_closed_form(a_bar: f64, graph: &NetworkGraph, b: f64) -> Result<f64> {
    if graph.node_count() <= CLOSED_FORM_DENSE_LIMIT {
        gamma_closed_form_dense(a_bar, graph, b)
    } else {
        gamma_closed_form_spectral(a_bar, graph, b)
    }
}

fn check_unit(a_bar: f64) -> Result<()> {
    if a_bar > 0.0 && a_bar < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("a_bar must lie in (0, 1), got {a_bar}")))
    }
}

pub fn gamma_closed_form_dense(a_bar: f64, graph: &NetworkGraph, b: f64) -> Result<f64> {
    check_unit(a_bar)?;
    let n = graph.node_count();
    let bbt = dense_laplacian(graph) * (b * b);
    let id = DMatrix::<f64>::identity(n, n);
    let om = 1.0 - a_bar;
    let g = (&id * (om * a_bar) - &bbt) / (om * om);
    let half = &id * a_bar + &bbt / (a_bar - 1.0);
    let f = half.transpose() * &half;
    let denom = &g * om - f;
    let eig = denom.clone().symmetric_eigenvalues();
    let smallest = eig.iter().fold(f64::INFINITY, |m, e| m.min(e.abs()));
    let largest = eig.iter().fold(0.0f64, |m, e| m.max(e.abs()));
    if smallest <= 1e-12 * largest.max(1.0) {
        return Err(Error::Singular("(1 - a_bar) G - F".into()));
    }
    let inv = denom
        .try_inverse()
        .ok_or_else(|| Error::Singular("(1 - a_bar) G - F".into()))?;
    let prod = g * inv;
    let norm = prod.singular_values().max();
    Ok(norm.sqrt())
}

/// Shared-eigenbasis evaluation of [`gamma_closed_form`].
///
/// `G` and `F` are polynomials in `L`, so on an eigenvector with
/// `B B^T`-eigenvalue `s` the product acts as the scalar
/// `g(s) / ((1 - a) g(s) - f(s))`, which simplifies to `1 / ((1 - a)^2 + s)`
/// wherever it is defined. That is largest at `s = 0`, always in the spectrum
/// of `L`. The only pole is `s = a (1 - a)`, checked with inertia counts.
pub fn gamma_closed_form_spectral(a_bar: f64, graph: &NetworkGraph, b: f64) -> Result<f64> {
    check_unit(a_bar)?;
    let om = 1.0 - a_bar;
    let pole = a_bar * om / (b * b);
    let laplacian = SparseSymmetric::from_graph(graph, &vec![0.0; graph.node_count()], 1.0)?;
    let below = sparse::count_eigenvalues_below(&laplacian, pole * (1.0 - 1e-9));
    let above = sparse::count_eigenvalues_below(&laplacian, pole * (1.0 + 1e-9));
    if below != above {
        return Err(Error::Singular("(1 - a_bar) G - F".into()));
    }
    let ratio = |s: f64| {
        let g = (om * a_bar - s) / (om * om);
        let half = a_bar + s / (a_bar - 1.0);
        g / (om * g - half * half)
    };
    Ok(ratio(0.0).abs().sqrt())
}

/// Every bound for one network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainBounds {
    pub gamma_lower: f64,
    pub gamma_closed_form: f64,
    /// `None` when the cubic has no positive real root.
    pub gamma_upper: Option<f64>,
    pub beta_min: Option<f64>,
    pub cubic: CubicCoefficients,
    pub real_roots: Vec<f64>,
    pub a_max: f64,
    pub a_min: f64,
    pub zero_control_gains: Vec<f64>,
}

impl GainBounds {
    pub fn zero_gain_range(&self) -> (f64, f64) {
        self.zero_control_gains
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &g| (lo.min(g), hi.max(g)))
    }
}

/// Computes every bound for a valid network.
pub fn compute_bounds(net: &UncertainNetwork) -> Result<GainBounds> {
    net.ensure_valid()?;
    let a_max = net.a_max();
    let a_min = net.a_min();
    let cubic = cubic_coefficients(a_max, a_min)?;
    let upper = match gamma_upper(a_max, a_min) {
        Ok(ub) => Some(ub),
        Err(Error::NoPositiveRoot) => None,
        Err(e) => return Err(e),
    };
    let zero_control_gains = net
        .graph()
        .degrees()
        .into_iter()
        .map(|d| zero_control_gain(net.b(), d))
        .collect::<Result<Vec<_>>>()?;
    Ok(GainBounds {
        gamma_lower: gamma_lower(net)?,
        gamma_closed_form: gamma_closed_form(a_max, net.graph(), net.b())?,
        gamma_upper: upper.as_ref().map(|u| u.gamma),
        beta_min: upper.as_ref().map(|u| u.beta_min),
        real_roots: real_polynomial_roots(&cubic.as_array()),
        cubic,
        a_max,
        a_min,
        zero_control_gains,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{CandidateSet, TrueModelRule};
    use crate::graph::{generate_line, generate_tree};

    /// Peak of `|1 / (e^{jw} - a)|` over a frequency grid.
    fn frequency_sweep_peak(a: f64) -> f64 {
        (0..=4000)
            .map(|k| {
                let w = std::f64::consts::PI * k as f64 / 4000.0;
                let (re, im) = (w.cos() - a, w.sin());
                1.0 / (re * re + im * im).sqrt()
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn zero_control_examples() {
        let g = zero_control_gain(0.1, 1).unwrap();
        assert!((g - 1.0 / (0.5 - 0.23f64.sqrt())).abs() < 1e-12);
        assert!((g - 48.98).abs() < 0.01);
        let (_, hi) = admissible_interval(0.1, 1).unwrap();
        assert!((frequency_sweep_peak(hi) - g).abs() < 1e-9 * g);

        assert!((zero_control_gain(0.15, 2).unwrap() - 10.0).abs() < 1e-12);

        let mut prev = 0.0;
        for b in [0.2, 0.1, 0.05, 0.01, 0.001] {
            let v = zero_control_gain(b, 1).unwrap();
            assert!(v > prev);
            prev = v;
        }
        assert!(zero_control_gain(0.5, 1).is_err());
    }

    #[test]
    fn margin_examples() {
        assert!(margin_check(&[0.2, 0.9], 10.0));
        assert!(!margin_check(&[0.99], 5.0));
    }

    #[test]
    fn gamma_lower_diagonal_limit() {
        let g = generate_line(4).unwrap();
        let a = [0.3, 0.8, 0.5, 0.6];
        let v = hinf_gain(&a, &g, 1e-7).unwrap();
        assert!((v - 1.0 / (1.0 - 0.8)).abs() < 1e-6);
    }

    #[test]
    fn gamma_lower_matches_dense() {
        for seed in 0..8 {
            let g = generate_tree(30, seed).unwrap();
            let net =
                UncertainNetwork::sample(g, 0.1, 2, 0.05, seed, &TrueModelRule::Fixed { index: 0 })
                    .unwrap();
            let sparse = gamma_lower(&net).unwrap();
            let dense = gamma_lower_dense(&net).unwrap();
            assert!(((sparse - dense) / dense).abs() <= 1e-8);
        }
    }

    #[test]
    fn riccati_two_node_example() {
        let g = generate_line(2).unwrap();
        let ub = gamma_upper(0.6, 0.4).unwrap();
        let r = riccati_residual(&[0.6, 0.4], &g, 0.1, ub.gamma).unwrap();
        assert!(r >= -1e-8);
        let r = riccati_residual(&[0.5, 0.5], &g, 0.1, 1e8).unwrap();
        assert!(r >= -1e-8);
        assert!(riccati_residual(&[0.5, 0.5], &g, 0.1, 1.0).is_err());
    }

    #[test]
    fn riccati_outside_hypothesis_is_computable() {
        let g = generate_line(3).unwrap();
        // a = 0.99 at the degree-2 node breaks a^2 + 2 b^2 d < a
        let r = riccati_residual(&[0.5, 0.99, 0.5], &g, 0.1, 1e3);
        assert!(r.is_ok());
    }

    #[test]
    fn closed_form_scalar_reduction() {
        // b -> 0: G = a/(1-a) I, F = a^2 I, so the bound is sqrt(1/((1-a)(1-a)))
        let g = generate_line(2).unwrap();
        for a in [0.2, 0.5, 0.9] {
            let v = gamma_closed_form_dense(a, &g, 1e-9).unwrap();
            let scalar = ((a / (1.0 - a)) / ((1.0 - a) * a / (1.0 - a) - a * a)).sqrt();
            assert!((v - scalar).abs() < 1e-6 * scalar);
            assert!((scalar - 1.0 / (1.0 - a)).abs() < 1e-9 * scalar);
        }
    }

    #[test]
    fn closed_form_dense_and_spectral_agree() {
        let line = generate_line(2).unwrap();
        for a in [0.3, 0.6, 0.95] {
            let d = gamma_closed_form_dense(a, &line, 0.1).unwrap();
            let s = gamma_closed_form_spectral(a, &line, 0.1).unwrap();
            assert!((d - s).abs() <= 1e-10 * d.max(1.0));
        }
        let tree = generate_tree(40, 2).unwrap();
        let d = gamma_closed_form_dense(0.8, &tree, 0.1).unwrap();
        let s = gamma_closed_form_spectral(0.8, &tree, 0.1).unwrap();
        assert!((d - s).abs() <= 1e-9 * d);
    }

    #[test]
    fn closed_form_monotone_in_a() {
        let g = generate_tree(25, 6).unwrap();
        let mut prev = 0.0;
        for k in 1..19 {
            let a = 0.05 * k as f64;
            let v = gamma_closed_form_dense(a, &g, 0.1).unwrap();
            assert!(v > prev);
            prev = v;
        }
    }

    #[test]
    fn closed_form_pole_is_reported() {
        // 2-node line: Laplacian eigenvalues {0, 2}; pole at a(1-a)/b^2 = 2
        let g = generate_line(2).unwrap();
        let a = 0.5;
        let b = (a * (1.0 - a) / 2.0f64).sqrt();
        assert!(matches!(gamma_closed_form_spectral(a, &g, b), Err(Error::Singular(_))));
        assert!(matches!(gamma_closed_form_dense(a, &g, b), Err(Error::Singular(_))));
    }

    #[test]
    fn bounds_for_single_model_network() {
        let g = generate_line(3).unwrap();
        let sets = vec![CandidateSet::new(vec![0.6]).unwrap(); 3];
        let net = UncertainNetwork::new(g, 0.1, sets, vec![0; 3]).unwrap();
        let b = compute_bounds(&net).unwrap();
        assert_eq!(b.cubic.f1, 0.0);
        // with a single model the cubic has only negative coefficients
        assert_eq!(b.gamma_upper, None);
        assert!(b.gamma_lower > 0.0 && b.gamma_closed_form > 0.0);
        assert_eq!(b.zero_control_gains.len(), 3);
    }
}
