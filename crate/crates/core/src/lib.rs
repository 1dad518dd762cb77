//! Numerical laboratory for additive-Gaussian denoising.
//!
//! Everything here is organized around one identity: when a clean draw `x`
//! is corrupted as `x~ = x + sigma * eps` with isotropic Gaussian noise, the
//! mean-square-optimal denoiser is
//!
//! ```text
//! g*(x~) = x~ + sigma^2 * grad log p(x~)
//! ```
//!
//! where `p` is the density of the *corrupted* data. Gaussian mixtures make
//! every quantity in that identity available in closed form, so each module
//! supplies an independent route to one side of it and the routes can be
//! checked against each other at tight tolerances:
//!
//! - [`mixture`]: exact mixture densities, scores, corruption (covariance
//!   shift), sampling, and the conjugate posterior mean.
//! - [`denoise`]: denoisers as first-class values; the score form, two
//!   oracle forms (quadrature and Monte Carlo Bayes ratios), and the
//!   small-noise approximation built from the clean score.
//! - [`reconstruct`]: the inverse direction; recover a log-density from a
//!   denoiser by line-integrating `(g(x) - x) / sigma^2`, plus path
//!   independence and curl diagnostics.
//! - [`deconv`]: the distribution-level chain; Gaussian convolution and
//!   regularized deconvolution on grids via the FFT.
//! - [`numerics`]: the substrate (quadrature rules, stable reductions,
//!   small dense linear algebra, reproducible random numbers).
//! - [`testkit`]: deterministic fixtures shared by the verification suites.

use thiserror::Error;

pub mod deconv;
pub mod denoise;
pub mod mixture;
pub mod numerics;
pub mod reconstruct;
pub mod testkit;

/// Unified error type for the whole laboratory.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid point: {0}")]
    InvalidPoint(String),

    #[error("invalid mixture: {0}")]
    InvalidMixture(String),

    #[error("invalid corruption model: sigma must be positive and finite, got {0}")]
    InvalidSigma(f64),

    #[error(
        "degenerate density: component {component} has a singular covariance; \
         corrupt() the mixture first to obtain a smooth density"
    )]
    DegenerateDensity { component: usize },

    #[error("clean score undefined: component {component} is a point mass")]
    CleanScoreUndefined { component: usize },

    #[error("quadrature oracle supports dimension <= 2, got {dim}: use the Monte Carlo oracle")]
    UseMonteCarloOracle { dim: usize },

    #[error(
        "proposal mismatch: all importance weights underflowed (max log-weight {max_log_weight:.1}); \
         increase the sample count or use the quadrature oracle"
    )]
    ProposalMismatch { max_log_weight: f64 },

    #[error("invalid contour: {0}")]
    InvalidContour(String),

    #[error("path independence is trivial in one dimension")]
    TriviallyPathIndependent,

    #[error("denoiser not integrable on box: non-finite line integral at grid node {node:?}")]
    NotIntegrable { node: Vec<usize> },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("spectral grid requires power-of-two shape entries >= 16, got {0}")]
    NonPowerOfTwoShape(usize),

    #[error(
        "wraparound risk: estimated folded mass {bound:.3e} exceeds {limit:.1e}; \
         widen the box so each side clears the density support by at least {required_margin:.3}"
    )]
    WraparoundRisk {
        bound: f64,
        limit: f64,
        required_margin: f64,
    },

    #[error(
        "ill-posed without regularization: transfer function underflows at frequency {frequency:.6}"
    )]
    IllPosed { frequency: f64 },

    #[error("spectrum of a real grid lost Hermitian symmetry: imaginary residue {residue:.3e}")]
    SpectralResidue { residue: f64 },

    #[error("matrix is not positive definite: pivot {pivot} (value {value:.6e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    #[error("eigenvalue iteration failed to converge")]
    EigenNoConvergence,

    #[error("quadrature order {got} outside supported range [{min}, {max}]")]
    QuadratureOrder { got: usize, min: usize, max: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("mixture file {path}: {reason}")]
    MixtureFile { path: String, reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;
