//! Shared fixtures: the standard mixtures exercised throughout the test
//! suites, plus seeded random mixture generators for property-style checks.
//!
//! The random generators deliberately keep component scales within
//! [0.5, 1.5] and means within [-2, 2]. That keeps every fixture resolvable
//! by the quadrature oracle at its maximum order across the noise range the
//! suites sweep (sigma in [0.1, 2]), so a test failure means a real defect
//! rather than an under-resolved oracle.

use crate::mixture::{Component, GaussianMixture, Point};
use crate::numerics::{Matrix, RandomSource};

/// N(0, 1) in one dimension.
pub fn standard_normal_1d() -> GaussianMixture {
    GaussianMixture::gaussian_1d(0.0, 1.0).expect("standard normal is valid")
}

/// Asymmetric two-component mixture: 0.5 N(-1, 0.3) + 0.5 N(1.5, 0.5).
pub fn bimodal_1d() -> GaussianMixture {
    GaussianMixture::mixture_1d(&[(0.5, -1.0, 0.3), (0.5, 1.5, 0.5)])
        .expect("bimodal fixture is valid")
}

/// Two equal point masses at -1 and +1. Degenerate until corrupted; its
/// optimal denoiser at noise level sigma is tanh(x / sigma^2).
pub fn two_point_1d() -> GaussianMixture {
    GaussianMixture::mixture_1d(&[(0.5, -1.0, 0.0), (0.5, 1.0, 0.0)])
        .expect("two-point fixture is valid")
}

/// Two-dimensional, two-component mixture with one correlated covariance.
pub fn smooth_2d() -> GaussianMixture {
    let c0 = Component::new(
        0.5,
        Point::new(vec![-1.0, 0.0]).expect("finite mean"),
        Matrix::from_rows(&[vec![0.8, 0.3], vec![0.3, 0.6]]).expect("square rows"),
    );
    let c1 = Component::new(
        0.5,
        Point::new(vec![1.0, 1.0]).expect("finite mean"),
        Matrix::from_rows(&[vec![0.5, -0.2], vec![-0.2, 0.9]]).expect("square rows"),
    );
    GaussianMixture::new(2, vec![c0, c1]).expect("2d fixture is valid")
}

fn uniform_in(rng: &mut RandomSource, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.next_uniform()
}

/// Random SPD 2x2 covariance: a rotation applied to diag(s1^2, s2^2) with
/// s in [0.5, 1.5]. Built symmetric entry by entry so validation's exact
/// symmetry check passes.
fn random_cov_2d(rng: &mut RandomSource) -> Matrix {
    let s1 = uniform_in(rng, 0.5, 1.5);
    let s2 = uniform_in(rng, 0.5, 1.5);
    let theta = uniform_in(rng, 0.0, std::f64::consts::PI);
    let (c, s) = (theta.cos(), theta.sin());
    let (a, b) = (s1 * s1, s2 * s2);
    // R diag(a, b) R^T, written out so the off-diagonals are the same f64.
    let m00 = c * c * a + s * s * b;
    let m11 = s * s * a + c * c * b;
    let m01 = c * s * (a - b);
    Matrix::from_rows(&[vec![m00, m01], vec![m01, m11]]).expect("square rows")
}

/// Random nondegenerate mixture with 1 to 3 components, means in [-2, 2]
/// per axis, and component scales in [0.5, 1.5]. Deterministic in `rng`.
pub fn random_smooth_mixture(rng: &mut RandomSource, dim: usize) -> GaussianMixture {
    assert!(dim == 1 || dim == 2, "fixture generator covers d = 1 and d = 2");
    let k = 1 + (rng.next_u64() % 3) as usize;
    let mut raw_weights = Vec::with_capacity(k);
    for _ in 0..k {
        raw_weights.push(uniform_in(rng, 0.2, 1.0));
    }
    let total: f64 = raw_weights.iter().sum();
    let mut weights: Vec<f64> = raw_weights.iter().map(|w| w / total).collect();
    // Force the exact-sum invariant: the last weight absorbs rounding.
    let head: f64 = weights[..k - 1].iter().sum();
    weights[k - 1] = 1.0 - head;

    let components = weights
        .into_iter()
        .map(|w| {
            let mean: Vec<f64> = (0..dim).map(|_| uniform_in(rng, -2.0, 2.0)).collect();
            let cov = if dim == 1 {
                let s = uniform_in(rng, 0.5, 1.5);
                let mut m = Matrix::zeros(1);
                m.set(0, 0, s * s);
                m
            } else {
                random_cov_2d(rng)
            };
            Component::new(w, Point::new(mean).expect("finite mean"), cov)
        })
        .collect();
    GaussianMixture::new(dim, components).expect("generated mixture is valid")
}

/// Random point with coordinates uniform in [-half_width, half_width].
pub fn random_point(rng: &mut RandomSource, dim: usize, half_width: f64) -> Point {
    let coords = (0..dim)
        .map(|_| uniform_in(rng, -half_width, half_width))
        .collect();
    Point::new(coords).expect("finite coordinates")
}
