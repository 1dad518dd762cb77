//! Gaussian mixtures with exact densities, scores, corruption, sampling, and
//! the conjugate posterior mean.
//!
//! Mixtures may contain point-mass components (zero covariance). Those have
//! no density or score of their own, but corruption by isotropic Gaussian
//! noise heals them: `corrupt` shifts every covariance by `sigma^2 I`, so the
//! corrupted mixture is always strictly positive definite. Operations that
//! need a smooth density reject point masses with a `DegenerateDensity` error
//! pointing at `corrupt`.
//!
//! Dimension is capped at 8: every covariance operation here goes through
//! explicit Cholesky factorizations, which is the right tool at that size.

use std::ops::Index;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::numerics::vecs::{add_scaled, l2_sq, sub};
use crate::numerics::{logsumexp, standard_normal, Cholesky, Matrix, RandomSource};
use crate::{Error, Result};

pub const MAX_DIM: usize = 8;

const LN_2PI: f64 = 1.837_877_066_409_345_3;

/// A point in the mixture's sample space. Finite coordinates, length >= 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Point {
    coords: Vec<f64>,
}

impl Point {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::InvalidPoint("needs at least one coordinate".into()));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidPoint(format!(
                "non-finite coordinate in {coords:?}"
            )));
        }
        Ok(Point { coords })
    }

    /// Internal constructor for coordinates produced by our own arithmetic.
    pub(crate) fn from_unchecked(coords: Vec<f64>) -> Self {
        Point { coords }
    }

    pub fn origin(dim: usize) -> Self {
        Point {
            coords: vec![0.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }
}

impl Index<usize> for Point {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.coords[i]
    }
}

impl From<Point> for Vec<f64> {
    fn from(p: Point) -> Vec<f64> {
        p.coords
    }
}

/// Additive isotropic Gaussian corruption `x~ = x + sigma * eps`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorruptionModel {
    sigma: f64,
}

impl CorruptionModel {
    pub fn new(sigma: f64) -> Result<Self> {
        if !sigma.is_finite() || sigma <= 0.0 {
            return Err(Error::InvalidSigma(sigma));
        }
        Ok(CorruptionModel { sigma })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn variance(&self) -> f64 {
        self.sigma * self.sigma
    }

    /// Corrupting twice composes in quadrature: the result equals a single
    /// corruption at `sqrt(sigma_1^2 + sigma_2^2)`.
    pub fn compose(&self, other: &CorruptionModel) -> CorruptionModel {
        CorruptionModel {
            sigma: (self.variance() + other.variance()).sqrt(),
        }
    }
}

/// One mixture component. Zero covariance marks a point mass.
#[derive(Debug, Clone, PartialEq)]
pub struct Component {
    weight: f64,
    mean: Point,
    covariance: Matrix,
}

impl Component {
    pub fn new(weight: f64, mean: Point, covariance: Matrix) -> Self {
        Component {
            weight,
            mean,
            covariance,
        }
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }

    pub fn mean(&self) -> &Point {
        &self.mean
    }

    pub fn covariance(&self) -> &Matrix {
        &self.covariance
    }

    pub fn is_point_mass(&self) -> bool {
        self.covariance.is_zero()
    }
}

/// Finite Gaussian mixture, weights summing to one, covariances symmetric
/// positive semidefinite.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMixture {
    dim: usize,
    components: Vec<Component>,
}

impl GaussianMixture {
    pub fn new(dim: usize, components: Vec<Component>) -> Result<Self> {
        if dim == 0 || dim > MAX_DIM {
            return Err(Error::InvalidMixture(format!(
                "dimension must be in 1..={MAX_DIM}, got {dim}"
            )));
        }
        if components.is_empty() {
            return Err(Error::InvalidMixture("needs at least one component".into()));
        }
        let mut weight_sum = 0.0;
        for (k, c) in components.iter().enumerate() {
            if !c.weight.is_finite() || !(0.0..=1.0).contains(&c.weight) {
                return Err(Error::InvalidMixture(format!(
                    "component {k}: weight {} outside [0, 1]",
                    c.weight
                )));
            }
            weight_sum += c.weight;
            if c.mean.dim() != dim {
                return Err(Error::InvalidMixture(format!(
                    "component {k}: mean has dimension {}, mixture has {dim}",
                    c.mean.dim()
                )));
            }
            let cov = &c.covariance;
            if cov.dim() != dim {
                return Err(Error::InvalidMixture(format!(
                    "component {k}: covariance is {0}x{0}, mixture has dimension {dim}",
                    cov.dim()
                )));
            }
            if !cov.is_finite() {
                return Err(Error::InvalidMixture(format!(
                    "component {k}: covariance has non-finite entries"
                )));
            }
            let asym_tol = 1e-12 * cov.max_abs().max(1.0);
            if cov.max_asymmetry() > asym_tol {
                return Err(Error::InvalidMixture(format!(
                    "component {k}: covariance is not symmetric (asymmetry {:.3e})",
                    cov.max_asymmetry()
                )));
            }
            let min_eig = cov
                .symmetric_eigenvalues()
                .first()
                .copied()
                .unwrap_or(0.0);
            if min_eig < -1e-12 {
                return Err(Error::InvalidMixture(format!(
                    "component {k}: covariance has negative eigenvalue {min_eig:.3e}"
                )));
            }
        }
        if (weight_sum - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidMixture(format!(
                "weights sum to {weight_sum}, expected 1 within 1e-12"
            )));
        }
        Ok(GaussianMixture { dim, components })
    }

    /// 1D mixture from `(weight, mean, variance)` triples. Variance 0 makes a
    /// point mass.
    pub fn mixture_1d(spec: &[(f64, f64, f64)]) -> Result<Self> {
        let components = spec
            .iter()
            .map(|(w, m, v)| {
                let mut cov = Matrix::zeros(1);
                cov.set(0, 0, *v);
                Ok(Component::new(*w, Point::new(vec![*m])?, cov))
            })
            .collect::<Result<Vec<_>>>()?;
        GaussianMixture::new(1, components)
    }

    pub fn gaussian_1d(mean: f64, var: f64) -> Result<Self> {
        GaussianMixture::mixture_1d(&[(1.0, mean, var)])
    }

    /// Mixture of isotropic components from `(weight, mean, variance)` triples.
    pub fn isotropic(dim: usize, spec: &[(f64, Vec<f64>, f64)]) -> Result<Self> {
        let components = spec
            .iter()
            .map(|(w, m, v)| {
                let mut cov = Matrix::zeros(dim);
                for i in 0..dim {
                    cov.set(i, i, *v);
                }
                Ok(Component::new(*w, Point::new(m.clone())?, cov))
            })
            .collect::<Result<Vec<_>>>()?;
        GaussianMixture::new(dim, components)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    pub fn has_point_mass(&self) -> bool {
        self.components.iter().any(Component::is_point_mass)
    }

    fn check_point(&self, x: &Point) -> Result<()> {
        if x.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.dim(),
            });
        }
        Ok(())
    }

    /// Mixture density at `x`. Requires strictly positive definite
    /// covariances; point masses have no density until corrupted.
    pub fn density(&self, x: &Point) -> Result<f64> {
        Ok(self.log_density(x)?.exp())
    }

    /// Log density at `x`, computed through log-sum-exp so deep tails stay
    /// finite instead of underflowing.
    pub fn log_density(&self, x: &Point) -> Result<f64> {
        self.check_point(x)?;
        let prep = PreparedMixture::new(self)?;
        Ok(prep.log_density(x.coords()))
    }

    /// Gradient of the log density at `x`.
    pub fn score(&self, x: &Point) -> Result<Point> {
        self.check_point(x)?;
        let prep = PreparedMixture::new(self)?;
        Ok(Point::from_unchecked(prep.score(x.coords())))
    }

    /// Posterior component probabilities at `x` (softmax of the per-component
    /// log joint terms); they sum to one by construction.
    pub fn responsibilities(&self, x: &Point) -> Result<Vec<f64>> {
        self.check_point(x)?;
        let prep = PreparedMixture::new(self)?;
        Ok(prep.responsibilities(x.coords()))
    }

    /// The mixture of `x + sigma * eps`: every covariance shifted by
    /// `sigma^2 I`. Exact in parameters, and strictly positive definite even
    /// when the input has point masses.
    pub fn corrupt(&self, noise: &CorruptionModel) -> GaussianMixture {
        let components = self
            .components
            .iter()
            .map(|c| {
                Component::new(
                    c.weight,
                    c.mean.clone(),
                    c.covariance.add_scaled_identity(noise.variance()),
                )
            })
            .collect();
        GaussianMixture {
            dim: self.dim,
            components,
        }
    }

    /// `n` independent draws. Draw `i` consumes substream `i` of the seed, so
    /// the output is reproducible bitwise and can be partitioned by index.
    /// Component selection is categorical with cumulative-weight first-match;
    /// point-mass components return their mean exactly.
    pub fn sample(&self, n: usize, seed: u64) -> Vec<Point> {
        let factors: Vec<Cholesky> = self
            .components
            .iter()
            .map(|c| c.covariance.cholesky_psd())
            .collect();
        let cumulative = self.cumulative_weights();
        (0..n)
            .map(|i| {
                let mut src = RandomSource::new(seed, i as u64);
                self.draw_one(&factors, &cumulative, &mut src)
            })
            .collect()
    }

    pub(crate) fn cumulative_weights(&self) -> Vec<f64> {
        let mut cum = Vec::with_capacity(self.components.len());
        let mut acc = 0.0;
        for c in &self.components {
            acc += c.weight;
            cum.push(acc);
        }
        cum
    }

    pub(crate) fn psd_factors(&self) -> Vec<Cholesky> {
        self.components
            .iter()
            .map(|c| c.covariance.cholesky_psd())
            .collect()
    }

    /// One draw from an already-prepared mixture, consuming `src`.
    pub(crate) fn draw_one(
        &self,
        factors: &[Cholesky],
        cumulative: &[f64],
        src: &mut RandomSource,
    ) -> Point {
        let u = src.next_uniform();
        let k = cumulative
            .iter()
            .position(|c| u < *c)
            .unwrap_or(self.components.len() - 1);
        let c = &self.components[k];
        let z = standard_normal(src, self.dim);
        let colored = factors[k].matvec_lower(&z);
        Point::from_unchecked(add_scaled(c.mean.coords(), 1.0, &colored))
    }

    /// Exact minimum-mean-square-error denoiser `E[x | x~ = xt]` under this
    /// clean mixture and the given noise, via conjugate closed forms:
    ///
    /// - posterior weights are the corrupted mixture's responsibilities at
    ///   `xt`, computed through log-sum-exp;
    /// - per-component posterior means are
    ///   `Sigma_k (Sigma_k + sigma^2 I)^{-1} xt + sigma^2 (Sigma_k + sigma^2 I)^{-1} mu_k`.
    ///
    /// Point masses are legal: their posterior mean is the mass location.
    pub fn posterior_mean(&self, noise: &CorruptionModel, xt: &Point) -> Result<Point> {
        self.check_point(xt)?;
        let s2 = noise.variance();
        let d = self.dim as f64;
        let mut log_terms = Vec::with_capacity(self.components.len());
        let mut comp_means = Vec::with_capacity(self.components.len());
        for (k, c) in self.components.iter().enumerate() {
            let a = c.covariance.add_scaled_identity(s2);
            let chol = a.cholesky().map_err(|_| Error::InvalidMixture(format!(
                "component {k}: corrupted covariance failed to factorize"
            )))?;
            let diff = sub(xt.coords(), c.mean.coords());
            let z = chol.forward(&diff);
            let log_marginal = -0.5 * d * LN_2PI - 0.5 * chol.log_det() - 0.5 * l2_sq(&z);
            log_terms.push(c.weight.ln() + log_marginal);

            let a_inv_xt = chol.solve(xt.coords());
            let a_inv_mu = chol.solve(c.mean.coords());
            let shrunk = c.covariance.matvec(&a_inv_xt);
            let m: Vec<f64> = shrunk
                .iter()
                .zip(&a_inv_mu)
                .map(|(sx, am)| sx + s2 * am)
                .collect();
            comp_means.push(m);
        }
        let lse = logsumexp(&log_terms);
        let mut out = vec![0.0; self.dim];
        for (t, m) in log_terms.iter().zip(&comp_means) {
            let r = (t - lse).exp();
            for (o, mi) in out.iter_mut().zip(m) {
                *o += r * mi;
            }
        }
        Ok(Point::from_unchecked(out))
    }

    /// Axis-aligned box `[mu_j - z s_j, mu_j + z s_j]` covering every
    /// component, where `s_j` is that component's marginal standard
    /// deviation along axis `j`. At `z = 6.5` a single Gaussian keeps all
    /// but ~8e-11 of its mass per axis inside the box.
    pub fn mass_box(&self, z: f64) -> (Vec<f64>, Vec<f64>) {
        let mut lo = vec![f64::INFINITY; self.dim];
        let mut hi = vec![f64::NEG_INFINITY; self.dim];
        for c in &self.components {
            for j in 0..self.dim {
                let s = c.covariance.get(j, j).max(0.0).sqrt();
                lo[j] = lo[j].min(c.mean[j] - z * s);
                hi[j] = hi[j].max(c.mean[j] + z * s);
            }
        }
        (lo, hi)
    }

    pub fn from_spec(spec: &MixtureSpec) -> Result<Self> {
        spec.build()
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let spec: MixtureSpec = serde_json::from_str(s).map_err(|e| Error::MixtureFile {
            path: "<inline>".into(),
            reason: e.to_string(),
        })?;
        spec.build()
    }

    pub fn from_json_file<P: AsRef<Path>>(path: P) -> Result<Self> {
        let path_str = path.as_ref().display().to_string();
        let text = std::fs::read_to_string(&path).map_err(|e| Error::MixtureFile {
            path: path_str.clone(),
            reason: e.to_string(),
        })?;
        let spec: MixtureSpec = serde_json::from_str(&text).map_err(|e| Error::MixtureFile {
            path: path_str.clone(),
            reason: e.to_string(),
        })?;
        spec.build().map_err(|e| Error::MixtureFile {
            path: path_str,
            reason: e.to_string(),
        })
    }

    pub fn to_spec(&self) -> MixtureSpec {
        MixtureSpec {
            dim: self.dim,
            components: self
                .components
                .iter()
                .map(|c| ComponentSpec {
                    weight: c.weight,
                    mean: c.mean.coords().to_vec(),
                    cov: CovSpec::Full(
                        (0..self.dim)
                            .map(|i| (0..self.dim).map(|j| c.covariance.get(i, j)).collect())
                            .collect(),
                    ),
                })
                .collect(),
        }
    }
}

/// Serializable mixture description: `{"dim": d, "components": [{"weight",
/// "mean", "cov"}]}` where `cov` is either a full matrix or a scalar
/// (isotropic shorthand).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MixtureSpec {
    pub dim: usize,
    pub components: Vec<ComponentSpec>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComponentSpec {
    pub weight: f64,
    pub mean: Vec<f64>,
    pub cov: CovSpec,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CovSpec {
    Isotropic(f64),
    Full(Vec<Vec<f64>>),
}

impl MixtureSpec {
    pub fn build(&self) -> Result<GaussianMixture> {
        let components = self
            .components
            .iter()
            .map(|c| {
                let cov = match &c.cov {
                    CovSpec::Isotropic(v) => {
                        let mut m = Matrix::zeros(self.dim);
                        for i in 0..self.dim {
                            m.set(i, i, *v);
                        }
                        m
                    }
                    CovSpec::Full(rows) => Matrix::from_rows(rows)?,
                };
                Ok(Component::new(c.weight, Point::new(c.mean.clone())?, cov))
            })
            .collect::<Result<Vec<_>>>()?;
        GaussianMixture::new(self.dim, components)
    }
}

/// Mixture with per-component Cholesky factors and log-normalizers cached;
/// the workhorse behind every density/score hot loop. Construction fails on
/// any component whose covariance is not strictly positive definite.
pub(crate) struct PreparedMixture {
    dim: usize,
    comps: Vec<PreparedComponent>,
}

pub(crate) struct PreparedComponent {
    ln_weight: f64,
    mean: Vec<f64>,
    chol: Cholesky,
    /// `-(d/2) ln(2 pi) - (1/2) log det Sigma`.
    log_norm: f64,
}

impl PreparedMixture {
    pub(crate) fn new(gmm: &GaussianMixture) -> Result<Self> {
        let d = gmm.dim() as f64;
        let comps = gmm
            .components
            .iter()
            .enumerate()
            .map(|(k, c)| {
                let chol = c
                    .covariance
                    .cholesky()
                    .map_err(|_| Error::DegenerateDensity { component: k })?;
                let log_norm = -0.5 * d * LN_2PI - 0.5 * chol.log_det();
                Ok(PreparedComponent {
                    ln_weight: c.weight.ln(),
                    mean: c.mean.coords().to_vec(),
                    chol,
                    log_norm,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(PreparedMixture {
            dim: gmm.dim(),
            comps,
        })
    }

    /// Prepare only the listed components (weights kept as-is, not
    /// renormalized). Used by oracles that split off point masses.
    pub(crate) fn from_components(gmm: &GaussianMixture, keep: &[usize]) -> Result<Self> {
        let d = gmm.dim() as f64;
        let comps = keep
            .iter()
            .map(|&k| {
                let c = &gmm.components[k];
                let chol = c
                    .covariance
                    .cholesky()
                    .map_err(|_| Error::DegenerateDensity { component: k })?;
                let log_norm = -0.5 * d * LN_2PI - 0.5 * chol.log_det();
                Ok(PreparedComponent {
                    ln_weight: c.weight.ln(),
                    mean: c.mean.coords().to_vec(),
                    chol,
                    log_norm,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(PreparedMixture {
            dim: gmm.dim(),
            comps,
        })
    }

    fn log_component_terms(&self, x: &[f64]) -> Vec<f64> {
        self.comps
            .iter()
            .map(|c| {
                let diff = sub(x, &c.mean);
                let z = c.chol.forward(&diff);
                c.ln_weight + c.log_norm - 0.5 * l2_sq(&z)
            })
            .collect()
    }

    pub(crate) fn log_density(&self, x: &[f64]) -> f64 {
        logsumexp(&self.log_component_terms(x))
    }

    pub(crate) fn responsibilities(&self, x: &[f64]) -> Vec<f64> {
        let terms = self.log_component_terms(x);
        let lse = logsumexp(&terms);
        terms.iter().map(|t| (t - lse).exp()).collect()
    }

    /// `grad log p(x) = sum_k r_k(x) Sigma_k^{-1} (mu_k - x)`.
    pub(crate) fn score(&self, x: &[f64]) -> Vec<f64> {
        let terms = self.log_component_terms(x);
        let m = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut denom = 0.0;
        let mut acc = vec![0.0; self.dim];
        for (c, t) in self.comps.iter().zip(&terms) {
            let r = (t - m).exp();
            if r == 0.0 {
                continue;
            }
            denom += r;
            let pull = c.chol.solve(&sub(&c.mean, x));
            for (a, p) in acc.iter_mut().zip(&pull) {
                *a += r * p;
            }
        }
        for a in acc.iter_mut() {
            *a /= denom;
        }
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{central_difference_gradient, QuadratureRule};

    const INV_SQRT_2PI: f64 = 0.3989422804014327;

    fn std_normal_1d() -> GaussianMixture {
        GaussianMixture::gaussian_1d(0.0, 1.0).unwrap()
    }

    fn two_points() -> GaussianMixture {
        GaussianMixture::mixture_1d(&[(0.5, -1.0, 0.0), (0.5, 1.0, 0.0)]).unwrap()
    }

    #[test]
    fn density_of_standard_normal_at_origin() {
        let p = std_normal_1d();
        let got = p.density(&Point::new(vec![0.0]).unwrap()).unwrap();
        assert!((got - INV_SQRT_2PI).abs() < 1e-15);
    }

    #[test]
    fn density_of_symmetric_pair_at_midpoint() {
        // (1/2) N(0; -1, 1) + (1/2) N(0; 1, 1) = N(0; 1, 1) = 0.24197...
        let p = GaussianMixture::mixture_1d(&[(0.5, -1.0, 1.0), (0.5, 1.0, 1.0)]).unwrap();
        let got = p.density(&Point::new(vec![0.0]).unwrap()).unwrap();
        assert!((got - 0.24197072451914337).abs() < 1e-15);
    }

    #[test]
    fn density_of_2d_standard_normal_at_origin() {
        let p = GaussianMixture::isotropic(2, &[(1.0, vec![0.0, 0.0], 1.0)]).unwrap();
        let got = p.density(&Point::new(vec![0.0, 0.0]).unwrap()).unwrap();
        assert!((got - 1.0 / (2.0 * std::f64::consts::PI)).abs() < 1e-15);
    }

    #[test]
    fn density_rejects_point_mass_components() {
        let p = two_points();
        match p.density(&Point::new(vec![0.0]).unwrap()) {
            Err(Error::DegenerateDensity { component }) => assert_eq!(component, 0),
            other => panic!("expected degenerate density error, got {other:?}"),
        }
    }

    #[test]
    fn log_density_stays_finite_in_deep_tail() {
        let p = std_normal_1d();
        let at0 = p.log_density(&Point::new(vec![0.0]).unwrap()).unwrap();
        assert!((at0 - (-0.9189385332046727)).abs() < 1e-14);
        let at30 = p.log_density(&Point::new(vec![30.0]).unwrap()).unwrap();
        assert!((at30 - (-450.9189385332047)).abs() < 1e-10);
        assert!(at30.is_finite());
    }

    #[test]
    fn log_density_of_corrupted_point_pair() {
        let noise = CorruptionModel::new(1.0).unwrap();
        let p = two_points().corrupt(&noise);
        let got = p.log_density(&Point::new(vec![0.0]).unwrap()).unwrap();
        // (1/2) N(0; -1, 1) + (1/2) N(0; 1, 1) = N(0; 1, 1).
        assert!((got - (-1.4189385332046727)).abs() < 1e-14);
    }

    #[test]
    fn score_of_standard_normal_is_negated_position() {
        let p = std_normal_1d();
        let got = p.score(&Point::new(vec![1.0]).unwrap()).unwrap();
        assert!((got[0] + 1.0).abs() < 1e-14);
    }

    #[test]
    fn score_of_anisotropic_gaussian_matches_solve() {
        // Sigma = diag(1, 4), x = (1, 2): score = -Sigma^{-1} x = (-1, -0.5).
        let cov = Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 4.0]]).unwrap();
        let comp = Component::new(1.0, Point::new(vec![0.0, 0.0]).unwrap(), cov);
        let p = GaussianMixture::new(2, vec![comp]).unwrap();
        let got = p.score(&Point::new(vec![1.0, 2.0]).unwrap()).unwrap();
        assert!((got[0] + 1.0).abs() < 1e-14);
        assert!((got[1] + 0.5).abs() < 1e-14);
    }

    #[test]
    fn score_matches_central_difference_of_log_density() {
        let p = GaussianMixture::mixture_1d(&[(0.5, -1.0, 0.5), (0.5, 2.0, 1.5)]).unwrap();
        let x = Point::new(vec![0.3]).unwrap();
        let analytic = p.score(&x).unwrap();
        let fd = central_difference_gradient(
            |v| p.log_density(&Point::new(v.to_vec()).unwrap()).unwrap(),
            x.coords(),
            1e-5,
        );
        assert!((analytic[0] - fd[0]).abs() < 1e-6);
    }

    #[test]
    fn score_matches_finite_differences_on_random_mixtures() {
        // 100 random (mixture, point) pairs in d = 1 and d = 2.
        let mut rng = RandomSource::new(20240817, 0);
        for case in 0..100 {
            let dim = 1 + (case % 2);
            let p = crate::testkit::random_smooth_mixture(&mut rng, dim);
            let x = crate::testkit::random_point(&mut rng, dim, 3.0);
            let analytic = p.score(&x).unwrap();
            let fd = central_difference_gradient(
                |v| p.log_density(&Point::new(v.to_vec()).unwrap()).unwrap(),
                x.coords(),
                1e-5,
            );
            for i in 0..dim {
                assert!(
                    (analytic[i] - fd[i]).abs() < 1e-6,
                    "case {case}: score {} vs fd {}",
                    analytic[i],
                    fd[i]
                );
            }
        }
    }

    #[test]
    fn corrupt_shifts_covariance_exactly() {
        let noise = CorruptionModel::new(1.0).unwrap();
        let p = std_normal_1d().corrupt(&noise);
        assert_eq!(p.components()[0].covariance().get(0, 0), 2.0);

        let half = CorruptionModel::new(0.5).unwrap();
        let pp = two_points().corrupt(&half);
        for c in pp.components() {
            assert_eq!(c.covariance().get(0, 0), 0.25);
        }
    }

    #[test]
    fn corruption_composes_in_quadrature() {
        let p = GaussianMixture::mixture_1d(&[(0.25, -2.0, 0.7), (0.75, 1.0, 1.3)]).unwrap();
        let a = CorruptionModel::new(0.6).unwrap();
        let b = CorruptionModel::new(0.8).unwrap();
        assert!((a.compose(&b).sigma() - 1.0).abs() < 1e-15);
        let twice = p.corrupt(&a).corrupt(&b);
        let once = p.corrupt(&CorruptionModel::new(1.0).unwrap());
        for (ct, co) in twice.components().iter().zip(once.components()) {
            // Equal up to one rounding of the variance sums.
            assert!((ct.covariance().get(0, 0) - co.covariance().get(0, 0)).abs() < 1e-15);
            assert_eq!(ct.mean(), co.mean());
            assert_eq!(ct.weight(), co.weight());
        }
    }

    #[test]
    fn sample_mean_within_clt_band() {
        let p = std_normal_1d();
        let n = 100_000;
        let draws = p.sample(n, 7);
        let mean = draws.iter().map(|d| d[0]).sum::<f64>() / n as f64;
        assert!(mean.abs() < 5.0 / (n as f64).sqrt(), "mean {mean}");
    }

    #[test]
    fn sample_point_masses_exactly_and_split_evenly() {
        let p = two_points();
        let n = 40_000;
        let draws = p.sample(n, 11);
        let mut plus = 0usize;
        for d in &draws {
            assert!(d[0] == 1.0 || d[0] == -1.0, "draw {} not a mass location", d[0]);
            if d[0] == 1.0 {
                plus += 1;
            }
        }
        let frac = plus as f64 / n as f64;
        assert!((frac - 0.5).abs() < 5.0 * 0.5 / (n as f64).sqrt(), "fraction {frac}");
    }

    #[test]
    fn sample_is_reproducible_bitwise() {
        let p = GaussianMixture::mixture_1d(&[(0.3, -1.0, 0.4), (0.7, 2.0, 1.1)]).unwrap();
        assert_eq!(p.sample(1000, 99), p.sample(1000, 99));
    }

    #[test]
    fn posterior_mean_matches_conjugate_shrinkage() {
        // N(0.5, 2), sigma = 1, xt = 1.4: (2 * 1.4 + 1 * 0.5) / 3 = 1.1.
        let p = GaussianMixture::gaussian_1d(0.5, 2.0).unwrap();
        let noise = CorruptionModel::new(1.0).unwrap();
        let got = p
            .posterior_mean(&noise, &Point::new(vec![1.4]).unwrap())
            .unwrap();
        assert!((got[0] - 1.1).abs() < 1e-14);

        // Fixed point at the mean.
        let q = GaussianMixture::gaussian_1d(3.0, 0.25).unwrap();
        let half = CorruptionModel::new(0.5).unwrap();
        let fixed = q
            .posterior_mean(&half, &Point::new(vec![3.0]).unwrap())
            .unwrap();
        assert!((fixed[0] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn posterior_mean_of_point_pair_is_tanh() {
        let p = two_points();
        let noise = CorruptionModel::new(1.0).unwrap();
        let got = p
            .posterior_mean(&noise, &Point::new(vec![0.5]).unwrap())
            .unwrap();
        assert!((got[0] - 0.5f64.tanh()).abs() < 1e-14);
        assert!((got[0] - 0.46211715726000974).abs() < 1e-12);
    }

    #[test]
    fn posterior_mean_equals_corrupted_score_identity() {
        let mut rng = RandomSource::new(555, 0);
        for case in 0..50 {
            let dim = 1 + (case % 2);
            let p = crate::testkit::random_smooth_mixture(&mut rng, dim);
            let sigma = 0.2 + 1.5 * rng.next_uniform();
            let noise = CorruptionModel::new(sigma).unwrap();
            let xt = crate::testkit::random_point(&mut rng, dim, 3.0);
            let direct = p.posterior_mean(&noise, &xt).unwrap();
            let corrupted = p.corrupt(&noise);
            let s = corrupted.score(&xt).unwrap();
            for i in 0..dim {
                let via_score = xt[i] + noise.variance() * s[i];
                assert!(
                    (direct[i] - via_score).abs() < 1e-10,
                    "case {case}: {} vs {}",
                    direct[i],
                    via_score
                );
            }
        }
    }

    #[test]
    fn responsibilities_sum_to_one() {
        let mut rng = RandomSource::new(321, 0);
        for case in 0..50 {
            let dim = 1 + (case % 2);
            let p = crate::testkit::random_smooth_mixture(&mut rng, dim);
            let x = crate::testkit::random_point(&mut rng, dim, 4.0);
            let r = p.responsibilities(&x).unwrap();
            let sum: f64 = r.iter().sum();
            assert!((sum - 1.0).abs() < 1e-12, "case {case}: sum {sum}");
            assert!(r.iter().all(|v| *v >= 0.0));
        }
    }

    #[test]
    fn density_integrates_to_one_on_wide_interval() {
        let p = GaussianMixture::mixture_1d(&[(0.4, 0.3, 1.7), (0.6, -0.9, 0.8)]).unwrap();
        // Box [mu - 10 s, mu + 10 s] over all components.
        let (lo, hi) = (-0.9 - 10.0 * 1.7f64.sqrt(), 0.3 + 10.0 * 1.7f64.sqrt());
        let rule = QuadratureRule::trapezoid(4096).unwrap();
        let mass = rule.integrate_on(lo, hi, |x| {
            p.density(&Point::new(vec![x]).unwrap()).unwrap()
        });
        assert!((mass - 1.0).abs() < 1e-8, "mass {mass}");
    }

    #[test]
    fn mixture_spec_json_round_trip_and_shorthand() {
        let text = r#"{
            "dim": 2,
            "components": [
                {"weight": 0.6, "mean": [0.0, 1.0], "cov": 0.5},
                {"weight": 0.4, "mean": [-1.0, 0.0], "cov": [[1.0, 0.2], [0.2, 0.8]]}
            ]
        }"#;
        let p = GaussianMixture::from_json_str(text).unwrap();
        assert_eq!(p.dim(), 2);
        assert_eq!(p.components()[0].covariance().get(0, 0), 0.5);
        assert_eq!(p.components()[0].covariance().get(0, 1), 0.0);
        assert_eq!(p.components()[1].covariance().get(1, 0), 0.2);

        let spec = p.to_spec();
        let round = spec.build().unwrap();
        assert_eq!(p, round);
    }

    #[test]
    fn validation_rejects_bad_mixtures() {
        // Weights off by more than 1e-12.
        let bad = GaussianMixture::mixture_1d(&[(0.5, 0.0, 1.0), (0.499, 1.0, 1.0)]);
        assert!(matches!(bad, Err(Error::InvalidMixture(_))));

        // Asymmetric covariance.
        let cov = Matrix::from_rows(&[vec![1.0, 0.3], vec![0.0, 1.0]]).unwrap();
        let comp = Component::new(1.0, Point::new(vec![0.0, 0.0]).unwrap(), cov);
        assert!(matches!(
            GaussianMixture::new(2, vec![comp]),
            Err(Error::InvalidMixture(_))
        ));

        // Indefinite covariance.
        let cov = Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap();
        let comp = Component::new(1.0, Point::new(vec![0.0, 0.0]).unwrap(), cov);
        assert!(matches!(
            GaussianMixture::new(2, vec![comp]),
            Err(Error::InvalidMixture(_))
        ));

        // Dimension cap.
        assert!(GaussianMixture::isotropic(9, &[(1.0, vec![0.0; 9], 1.0)]).is_err());
    }

    #[test]
    fn point_validation() {
        assert!(Point::new(vec![]).is_err());
        assert!(Point::new(vec![f64::NAN]).is_err());
        assert!(Point::new(vec![1.0, 2.0]).is_ok());
    }

    proptest::proptest! {
        #[test]
        fn posterior_mean_agrees_with_corrupted_score_route(
            xt in -5.0..5.0f64,
            sigma in 0.1..2.0f64,
        ) {
            let p = crate::testkit::bimodal_1d();
            let noise = CorruptionModel::new(sigma).unwrap();
            let x = Point::new(vec![xt]).unwrap();
            let direct = p.posterior_mean(&noise, &x).unwrap();
            let s = p.corrupt(&noise).score(&x).unwrap();
            let via_score = xt + noise.variance() * s[0];
            proptest::prop_assert!(
                (direct[0] - via_score).abs() < 1e-10,
                "{} vs {}", direct[0], via_score
            );
        }
    }
}
