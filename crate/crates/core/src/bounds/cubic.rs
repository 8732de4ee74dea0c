//! The cubic in `beta = gamma^2` whose smallest positive root gives the
//! upper bound on the adaptive controller's l2 gain.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `f1 beta^3 + f2 beta^2 + f3 beta + f4`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CubicCoefficients {
    pub f1: f64,
    pub f2: f64,
    pub f3: f64,
    pub f4: f64,
}

impl CubicCoefficients {
    pub fn eval(&self, beta: f64) -> f64 {
        ((self.f1 * beta + self.f2) * beta + self.f3) * beta + self.f4
    }

    pub fn derivative(&self, beta: f64) -> f64 {
        (3.0 * self.f1 * beta + 2.0 * self.f2) * beta + self.f3
    }

    /// Sum of `|f_k| beta^k` magnitudes, the natural scale for residuals at `beta`.
    pub fn residual_scale(&self, beta: f64) -> f64 {
        let b = beta.abs();
        self.f1.abs() * b * b * b + self.f2.abs() * b * b + self.f3.abs() * b + self.f4.abs()
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.f1, self.f2, self.f3, self.f4]
    }
}

/// Coefficients for network extremes `a_bar = max a`, `a_lower = min a`.
pub fn cubic_coefficients(a_bar: f64, a_lower: f64) -> Result<CubicCoefficients> {
    if !(0.0 < a_lower && a_lower <= a_bar && a_bar < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "need 0 < a_lower <= a_bar < 1, got a_lower = {a_lower}, a_bar = {a_bar}"
        )));
    }
    let (ab, al) = (a_bar, a_lower);
    let gap = ab - al;
    Ok(CubicCoefficients {
        f1: (1.0 - ab) * gap * gap / 8.0,
        f2: (-2.0 * ab.powi(3) + 4.0 * ab * ab - 2.0 * al * al + 4.0 * ab * al - 2.0 * ab - 2.0 * al)
            / 4.0,
        f3: (4.0 * ab.powi(3) - 14.0 * ab * ab + 16.0 * ab - 4.0 * al - 18.0) / (4.0 * (1.0 - ab)),
        f4: -1.0 / ((ab - 1.0) * (ab - 1.0)),
    })
}

/// Real roots of `c[0] x^k + ... + c[k]`, ascending, from companion-matrix
/// eigenvalues with a Newton polish. Leading zeros are dropped.
pub fn real_polynomial_roots(coeffs: &[f64]) -> Vec<f64> {
    let lead = coeffs.iter().position(|&c| c != 0.0);
    let Some(lead) = lead else {
        return Vec::new();
    };
    let c = &coeffs[lead..];
    let degree = c.len() - 1;
    if degree == 0 {
        return Vec::new();
    }
    // Companion matrix of the monic polynomial: first row -c[1..]/c[0], subdiagonal ones.
    let companion = DMatrix::from_fn(degree, degree, |r, col| {
        if r == 0 {
            -c[col + 1] / c[0]
        } else if r == col + 1 {
            1.0
        } else {
            0.0
        }
    });
    let eig = companion.complex_eigenvalues();
    let radius = eig.iter().map(|z| z.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let eval = |x: f64| c.iter().fold(0.0, |acc, &k| acc * x + k);
    let deriv = |x: f64| {
        c.iter()
            .take(degree)
            .enumerate()
            .fold(0.0, |acc, (i, &k)| acc * x + k * (degree - i) as f64)
    };
    let mut roots: Vec<f64> = eig
        .iter()
        .filter(|z| z.im.abs() <= 1e-9 * radius)
        .map(|z| polish(z.re, eval, deriv))
        .collect();
    roots.sort_by(f64::total_cmp);
    roots
}

fn polish(mut x: f64, f: impl Fn(f64) -> f64, df: impl Fn(f64) -> f64) -> f64 {
    let mut fx = f(x);
    for _ in 0..4 {
        let d = df(x);
        if d == 0.0 || fx == 0.0 {
            break;
        }
        let next = x - fx / d;
        let fn_ = f(next);
        if fn_.abs() >= fx.abs() {
            break;
        }
        x = next;
        fx = fn_;
    }
    x
}

/// Result of the upper-bound root selection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpperBound {
    /// `sqrt(beta_min)`.
    pub gamma: f64,
    pub beta_min: f64,
    /// Every real root of the polynomial, ascending.
    pub real_roots: Vec<f64>,
    pub cubic: CubicCoefficients,
    /// Whether the polynomial stays non-negative on a sampled window just above `beta_min`.
    pub nonnegative_above_root: bool,
}

/// Relative width of the window sampled above `beta_min`.
const WINDOW: f64 = 1e-3;

/// `sqrt` of the smallest positive real root of the cubic.
///
/// With `a_bar == a_lower` the leading coefficient vanishes and the same
/// rule is applied to the remaining quadratic, which may have no positive root.
pub fn gamma_upper(a_bar: f64, a_lower: f64) -> Result<UpperBound> {
    let cubic = cubic_coefficients(a_bar, a_lower)?;
    let real_roots = real_polynomial_roots(&cubic.as_array());
    let beta_min = real_roots
        .iter()
        .copied()
        .filter(|&r| r > 0.0)
        .fold(f64::INFINITY, f64::min);
    if !beta_min.is_finite() {
        return Err(Error::NoPositiveRoot);
    }
    let nonnegative_above_root = (1..=20).all(|k| {
        let beta = beta_min * (1.0 + WINDOW * k as f64 / 20.0);
        cubic.eval(beta) >= -1e-8 * cubic.residual_scale(beta)
    });
    Ok(UpperBound {
        gamma: beta_min.sqrt(),
        beta_min,
        real_roots,
        cubic,
        nonnegative_above_root,
    })
}
