//! Quadrature rules: Gauss-Hermite (physicists' convention, weight
//! `exp(-t^2)`) built by Golub-Welsch, plus composite Simpson and trapezoid
//! rules on `[0, 1]`.

use crate::numerics::linalg::tridiag_eigen_first_row;
use crate::{Error, Result};

pub const GAUSS_HERMITE_MIN: usize = 2;
pub const GAUSS_HERMITE_MAX: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuadratureKind {
    /// Nodes/weights for `integral exp(-t^2) f(t) dt` over the real line.
    GaussHermite,
    /// Composite Simpson weights on `[0, 1]`.
    Simpson,
    /// Composite trapezoid weights on `[0, 1]`.
    Trapezoid,
}

#[derive(Debug, Clone)]
pub struct QuadratureRule {
    kind: QuadratureKind,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl QuadratureRule {
    /// Gauss-Hermite rule of order `n` (2 <= n <= 256).
    ///
    /// The Jacobi matrix for Hermite polynomials has zero diagonal and
    /// off-diagonal `sqrt(k/2)`; nodes are its eigenvalues and each weight is
    /// `sqrt(pi)` times the squared first eigenvector component. Nodes and
    /// weights are symmetrized about zero afterwards so the +/- pairing is
    /// exact in floating point.
    pub fn gauss_hermite(n: usize) -> Result<Self> {
        if !(GAUSS_HERMITE_MIN..=GAUSS_HERMITE_MAX).contains(&n) {
            return Err(Error::QuadratureOrder {
                got: n,
                min: GAUSS_HERMITE_MIN,
                max: GAUSS_HERMITE_MAX,
            });
        }
        let diag = vec![0.0; n];
        let off: Vec<f64> = (1..n).map(|k| (k as f64 / 2.0).sqrt()).collect();
        let pairs = tridiag_eigen_first_row(&diag, &off)?;
        let sqrt_pi = std::f64::consts::PI.sqrt();
        let mut nodes: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let mut weights: Vec<f64> = pairs.iter().map(|p| sqrt_pi * p.1 * p.1).collect();
        // Enforce exact symmetry: eigenvalues come out paired up to rounding.
        for i in 0..n / 2 {
            let j = n - 1 - i;
            let x = 0.5 * (nodes[j] - nodes[i]);
            nodes[i] = -x;
            nodes[j] = x;
            let w = 0.5 * (weights[i] + weights[j]);
            weights[i] = w;
            weights[j] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Ok(QuadratureRule {
            kind: QuadratureKind::GaussHermite,
            nodes,
            weights,
        })
    }

    /// Composite Simpson rule with an even number of intervals on `[0, 1]`.
    pub fn simpson(intervals: usize) -> Result<Self> {
        if intervals < 2 || intervals % 2 != 0 {
            return Err(Error::InvalidArgument(format!(
                "Simpson rule needs an even interval count >= 2, got {intervals}"
            )));
        }
        let h = 1.0 / intervals as f64;
        let nodes: Vec<f64> = (0..=intervals).map(|i| i as f64 * h).collect();
        let weights: Vec<f64> = (0..=intervals)
            .map(|i| {
                let c = if i == 0 || i == intervals {
                    1.0
                } else if i % 2 == 1 {
                    4.0
                } else {
                    2.0
                };
                c * h / 3.0
            })
            .collect();
        Ok(QuadratureRule {
            kind: QuadratureKind::Simpson,
            nodes,
            weights,
        })
    }

    /// Composite trapezoid rule on `[0, 1]`.
    pub fn trapezoid(intervals: usize) -> Result<Self> {
        if intervals < 1 {
            return Err(Error::InvalidArgument(
                "trapezoid rule needs at least one interval".into(),
            ));
        }
        let h = 1.0 / intervals as f64;
        let nodes: Vec<f64> = (0..=intervals).map(|i| i as f64 * h).collect();
        let weights: Vec<f64> = (0..=intervals)
            .map(|i| {
                let c = if i == 0 || i == intervals { 0.5 } else { 1.0 };
                c * h
            })
            .collect();
        Ok(QuadratureRule {
            kind: QuadratureKind::Trapezoid,
            nodes,
            weights,
        })
    }

    pub fn kind(&self) -> QuadratureKind {
        self.kind
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `sum w_i f(node_i)`. For Gauss-Hermite this approximates
    /// `integral exp(-t^2) f(t) dt`; for the `[0, 1]` rules it approximates
    /// `integral_0^1 f`.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * f(*x))
            .sum()
    }

    /// Integrate over `[a, b]` by affine substitution. Only meaningful for
    /// the `[0, 1]` rules; Gauss-Hermite has no finite interval.
    pub fn integrate_on<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        debug_assert!(self.kind != QuadratureKind::GaussHermite);
        let len = b - a;
        self.integrate(|t| f(a + t * len)) * len
    }
}
