//! Rebuilding a density from its denoiser.
//!
//! A denoiser `g` at noise level sigma determines the corrupted density up
//! to normalization through the residual field `g(x) - x`: the log density
//! difference between two points is the line integral of
//! `(g(x) - x) / sigma^2` along any path joining them. This module computes
//! those line integrals over polyline contours, checks that they really are
//! path independent (the signature that a candidate denoiser is a gradient
//! map, hence Bayes-optimal for some prior), and telescopes per-cell
//! integrals across a grid to reconstruct the full normalized density.

use crate::denoise::Denoiser;
use crate::mixture::{GaussianMixture, Point};
use crate::numerics::vecs::sub;
use crate::numerics::{QuadratureRule, RandomSource};
use crate::{Error, Result};

/// Streams at and above this offset draw path-check waypoints, away from
/// both per-sample substreams and perturbation-field streams.
const CONTOUR_STREAM_OFFSET: u64 = 2 << 32;

/// A polyline with at least two vertices; consecutive vertices must differ.
#[derive(Debug, Clone, PartialEq)]
pub struct Contour {
    vertices: Vec<Point>,
}

impl Contour {
    pub fn new(vertices: Vec<Point>) -> Result<Self> {
        if vertices.len() < 2 {
            return Err(Error::InvalidContour(format!(
                "needs at least two vertices, got {}",
                vertices.len()
            )));
        }
        let dim = vertices[0].dim();
        for v in &vertices {
            if v.dim() != dim {
                return Err(Error::InvalidContour(format!(
                    "mixed dimensions: {} and {}",
                    dim,
                    v.dim()
                )));
            }
        }
        for (i, pair) in vertices.windows(2).enumerate() {
            if pair[0] == pair[1] {
                return Err(Error::InvalidContour(format!(
                    "vertices {i} and {} coincide",
                    i + 1
                )));
            }
        }
        Ok(Contour { vertices })
    }

    pub fn straight(from: Point, to: Point) -> Result<Self> {
        Contour::new(vec![from, to])
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn dim(&self) -> usize {
        self.vertices[0].dim()
    }
}

/// Composite-Simpson value of `int (g(x) - x) . dx / sigma^2` over one
/// straight segment.
fn segment_increment(
    den: &Denoiser,
    from: &[f64],
    to: &[f64],
    rule: &QuadratureRule,
) -> Result<f64> {
    let dir = sub(to, from);
    let mut point = vec![0.0; from.len()];
    let mut acc = 0.0;
    for (t, w) in rule.nodes().iter().zip(rule.weights()) {
        for ((p, f), d) in point.iter_mut().zip(from).zip(&dir) {
            *p = f + t * d;
        }
        let g = den.eval(&Point::new(point.clone()).map_err(|_| {
            Error::InvalidContour("segment leaves the finite plane".into())
        })?)?;
        let dot: f64 = g
            .coords()
            .iter()
            .zip(&point)
            .zip(&dir)
            .map(|((gi, pi), di)| (gi - pi) * di)
            .sum();
        acc += w * dot;
    }
    Ok(acc / (den.sigma() * den.sigma()))
}

/// Line integral of the scaled residual field along a contour:
/// the value equals `log p(end) - log p(start)` for the corrupted density
/// whenever `g` is an exact posterior-mean denoiser. Each segment uses
/// composite Simpson with `steps_per_segment` subintervals (even, >= 2).
pub fn line_integral_log_density(
    den: &Denoiser,
    contour: &Contour,
    steps_per_segment: usize,
) -> Result<f64> {
    if contour.dim() != den.dim() {
        return Err(Error::DimensionMismatch {
            expected: den.dim(),
            got: contour.dim(),
        });
    }
    let rule = QuadratureRule::simpson(steps_per_segment)?;
    let mut total = 0.0;
    for pair in contour.vertices().windows(2) {
        total += segment_increment(den, pair[0].coords(), pair[1].coords(), &rule)?;
    }
    Ok(total)
}

/// Line integrals of the same endpoints along several contours.
#[derive(Debug, Clone)]
pub struct PathIndependenceReport {
    /// `values[0]` is the straight contour; the rest are seeded detours.
    pub values: Vec<f64>,
    /// Largest minus smallest value. Near zero for gradient fields; of
    /// order `2 * enclosed area * rotation / sigma^2` otherwise.
    pub spread: f64,
}

/// Integrate along the straight contour plus `n_detours` seeded two-segment
/// detours through random waypoints, and report the spread of the values.
/// In one dimension every contour gives the same answer by calculus, so the
/// check refuses to certify anything there.
pub fn path_independence_check(
    den: &Denoiser,
    start: &Point,
    end: &Point,
    n_detours: usize,
    steps_per_segment: usize,
    seed: u64,
) -> Result<PathIndependenceReport> {
    let d = den.dim();
    if d == 1 {
        return Err(Error::TriviallyPathIndependent);
    }
    if start.dim() != d || end.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: if start.dim() != d { start.dim() } else { end.dim() },
        });
    }
    if start == end {
        return Err(Error::InvalidContour(
            "start and end must differ for a path check".into(),
        ));
    }

    let mut values = Vec::with_capacity(n_detours + 1);
    let straight = Contour::straight(start.clone(), end.clone())?;
    values.push(line_integral_log_density(den, &straight, steps_per_segment)?);

    let mut src = RandomSource::new(seed, CONTOUR_STREAM_OFFSET);
    for _ in 0..n_detours {
        // Waypoint in the endpoint bounding box, inflated by one unit.
        let waypoint = loop {
            let coords: Vec<f64> = (0..d)
                .map(|j| {
                    let lo = start[j].min(end[j]) - 1.0;
                    let hi = start[j].max(end[j]) + 1.0;
                    lo + (hi - lo) * src.next_uniform()
                })
                .collect();
            let w = Point::new(coords)?;
            if w != *start && w != *end {
                break w;
            }
        };
        let detour = Contour::new(vec![start.clone(), waypoint, end.clone()])?;
        values.push(line_integral_log_density(den, &detour, steps_per_segment)?);
    }

    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(PathIndependenceReport {
        values,
        spread: max - min,
    })
}

/// Central-difference curl of the residual field `g(x) - x` at a point, for
/// d = 2: `d(g_1)/d(x_0) - d(g_0)/d(x_1)`. Zero (up to differencing error)
/// exactly when the denoiser is a gradient map near `x`.
pub fn curl_residual(den: &Denoiser, x: &Point, h: f64) -> Result<f64> {
    if den.dim() != 2 {
        return Err(Error::InvalidArgument(format!(
            "curl is a two-dimensional diagnostic, denoiser has d = {}",
            den.dim()
        )));
    }
    if x.dim() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            got: x.dim(),
        });
    }
    if !h.is_finite() || h <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "step must be positive and finite, got {h}"
        )));
    }
    let eval = |a: f64, b: f64| -> Result<Point> { den.eval(&Point::new(vec![a, b])?) };
    let gp0 = eval(x[0] + h, x[1])?;
    let gm0 = eval(x[0] - h, x[1])?;
    let gp1 = eval(x[0], x[1] + h)?;
    let gm1 = eval(x[0], x[1] - h)?;
    // The identity part of the field has zero curl, so differencing g alone
    // gives the residual's curl.
    let d0_g1 = (gp0[1] - gm0[1]) / (2.0 * h);
    let d1_g0 = (gp1[0] - gm1[0]) / (2.0 * h);
    Ok(d0_g1 - d1_g0)
}

/// A density (or any scalar field) sampled on the nodes of an axis-aligned
/// box grid, row-major, d = 1 or 2. Nodes include both box edges, so
/// spacing along axis `j` is `(hi_j - lo_j) / (n_j - 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridDensity {
    box_lo: Vec<f64>,
    box_hi: Vec<f64>,
    shape: Vec<usize>,
    values: Vec<f64>,
}

impl GridDensity {
    pub fn from_values(
        box_lo: Vec<f64>,
        box_hi: Vec<f64>,
        shape: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        let dim = shape.len();
        if dim == 0 || dim > 2 {
            return Err(Error::InvalidGrid(format!(
                "grids cover d = 1 and d = 2, got d = {dim}"
            )));
        }
        if box_lo.len() != dim || box_hi.len() != dim {
            return Err(Error::InvalidGrid(format!(
                "box has {} / {} coordinates for a {dim}-axis grid",
                box_lo.len(),
                box_hi.len()
            )));
        }
        for j in 0..dim {
            if !box_lo[j].is_finite() || !box_hi[j].is_finite() || box_lo[j] >= box_hi[j] {
                return Err(Error::InvalidGrid(format!(
                    "axis {j}: box [{}, {}] is not a finite interval",
                    box_lo[j], box_hi[j]
                )));
            }
            if shape[j] < 2 {
                return Err(Error::InvalidGrid(format!(
                    "axis {j}: needs at least 2 nodes, got {}",
                    shape[j]
                )));
            }
        }
        let expected: usize = shape.iter().product();
        if values.len() != expected {
            return Err(Error::InvalidGrid(format!(
                "shape {shape:?} implies {expected} values, got {}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidGrid("non-finite grid value".into()));
        }
        Ok(GridDensity {
            box_lo,
            box_hi,
            shape,
            values,
        })
    }

    /// Sample an arbitrary function on the grid nodes.
    pub fn tabulate_fn(
        box_lo: Vec<f64>,
        box_hi: Vec<f64>,
        shape: Vec<usize>,
        f: impl Fn(&[f64]) -> f64,
    ) -> Result<Self> {
        let probe = GridDensity::from_values(
            box_lo,
            box_hi,
            shape.clone(),
            vec![0.0; shape.iter().product()],
        )?;
        let mut values = Vec::with_capacity(probe.values.len());
        for idx in 0..probe.values.len() {
            values.push(f(&probe.node_of_flat(idx)));
        }
        GridDensity::from_values(probe.box_lo, probe.box_hi, probe.shape, values)
    }

    /// Sample a mixture's density on the grid nodes. The mixture must be
    /// smooth (corrupt it first if it has point masses).
    pub fn tabulate(
        gmm: &GaussianMixture,
        box_lo: Vec<f64>,
        box_hi: Vec<f64>,
        shape: Vec<usize>,
    ) -> Result<Self> {
        if shape.len() != gmm.dim() {
            return Err(Error::DimensionMismatch {
                expected: gmm.dim(),
                got: shape.len(),
            });
        }
        let prep = crate::mixture::PreparedMixture::new(gmm)?;
        GridDensity::tabulate_fn(box_lo, box_hi, shape, |x| prep.log_density(x).exp())
    }

    pub fn dim(&self) -> usize {
        self.shape.len()
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn box_lo(&self) -> &[f64] {
        &self.box_lo
    }

    pub fn box_hi(&self) -> &[f64] {
        &self.box_hi
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn spacing(&self) -> Vec<f64> {
        (0..self.dim())
            .map(|j| (self.box_hi[j] - self.box_lo[j]) / (self.shape[j] - 1) as f64)
            .collect()
    }

    pub fn axis_nodes(&self, axis: usize) -> Vec<f64> {
        let h = self.spacing()[axis];
        (0..self.shape[axis])
            .map(|i| self.box_lo[axis] + h * i as f64)
            .collect()
    }

    /// Coordinates of the node at a flat (row-major) index.
    pub(crate) fn node_of_flat(&self, flat: usize) -> Vec<f64> {
        let spacing = self.spacing();
        match self.dim() {
            1 => vec![self.box_lo[0] + spacing[0] * flat as f64],
            2 => {
                let (i, j) = (flat / self.shape[1], flat % self.shape[1]);
                vec![
                    self.box_lo[0] + spacing[0] * i as f64,
                    self.box_lo[1] + spacing[1] * j as f64,
                ]
            }
            _ => unreachable!("validated dimension"),
        }
    }

    /// Trapezoid volume attached to one node: interior nodes carry a full
    /// cell, faces and corners their fractions.
    pub(crate) fn node_weight(&self, flat: usize) -> f64 {
        let spacing = self.spacing();
        let axis_weight = |axis: usize, i: usize| -> f64 {
            if i == 0 || i == self.shape[axis] - 1 {
                0.5 * spacing[axis]
            } else {
                spacing[axis]
            }
        };
        match self.dim() {
            1 => axis_weight(0, flat),
            2 => {
                let (i, j) = (flat / self.shape[1], flat % self.shape[1]);
                axis_weight(0, i) * axis_weight(1, j)
            }
            _ => unreachable!("validated dimension"),
        }
    }

    /// Trapezoid integral over the box.
    pub fn integral(&self) -> f64 {
        self.values
            .iter()
            .enumerate()
            .map(|(i, v)| v * self.node_weight(i))
            .sum()
    }

    /// Rescale so the trapezoid integral is exactly one.
    pub fn normalized(&self) -> Result<GridDensity> {
        let total = self.integral();
        if !total.is_finite() || total <= 0.0 {
            return Err(Error::InvalidGrid(format!(
                "cannot normalize: integral is {total}"
            )));
        }
        let mut out = self.clone();
        for v in out.values.iter_mut() {
            *v /= total;
        }
        Ok(out)
    }

    /// Check the two properties of a density table: no negative values and
    /// unit mass within `mass_tol`.
    pub fn validate_density(&self, mass_tol: f64) -> Result<()> {
        if let Some((i, v)) = self
            .values
            .iter()
            .enumerate()
            .find(|(_, v)| **v < 0.0)
        {
            return Err(Error::InvalidGrid(format!(
                "negative density {v} at flat index {i}"
            )));
        }
        let total = self.integral();
        if (total - 1.0).abs() > mass_tol {
            return Err(Error::InvalidGrid(format!(
                "mass {total} differs from 1 by more than {mass_tol}"
            )));
        }
        Ok(())
    }

    /// Largest absolute difference from another grid with identical
    /// geometry.
    pub fn linf_diff(&self, other: &GridDensity) -> Result<f64> {
        if self.shape != other.shape || self.box_lo != other.box_lo || self.box_hi != other.box_hi
        {
            return Err(Error::InvalidGrid(
                "grids differ in box or shape; refusing to compare values".into(),
            ));
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    /// Largest absolute difference from a function sampled at the nodes.
    pub fn linf_diff_fn(&self, f: impl Fn(&[f64]) -> f64) -> f64 {
        (0..self.values.len())
            .map(|i| (self.values[i] - f(&self.node_of_flat(i))).abs())
            .fold(0.0, f64::max)
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// CSV rows `axis0[,axis1],value` with full-precision floats.
    pub fn write_csv<W: std::io::Write>(&self, w: &mut W) -> std::io::Result<()> {
        match self.dim() {
            1 => {
                writeln!(w, "axis0,value")?;
                for (i, v) in self.values.iter().enumerate() {
                    let node = self.node_of_flat(i);
                    writeln!(w, "{:.16e},{:.16e}", node[0], v)?;
                }
            }
            2 => {
                writeln!(w, "axis0,axis1,value")?;
                for (i, v) in self.values.iter().enumerate() {
                    let node = self.node_of_flat(i);
                    writeln!(w, "{:.16e},{:.16e},{:.16e}", node[0], node[1], v)?;
                }
            }
            _ => unreachable!("validated dimension"),
        }
        Ok(())
    }
}

/// A density recovered from a denoiser: normalized node values plus the log
/// of the normalizer that was divided out. `log_z` satisfies
/// `p_unnormalized(anchor) = 1`, i.e. `log_z = -log p(anchor)` when the
/// denoiser is exact and the box captures the full mass.
#[derive(Debug, Clone)]
pub struct Reconstruction {
    pub grid: GridDensity,
    pub log_z: f64,
}

/// Reconstruct the corrupted density on a grid by telescoping per-cell line
/// integrals of `(g(x) - x) / sigma^2` outward from the node nearest the
/// box center, then exponentiating (with a max shift) and normalizing by
/// the trapezoid integral.
pub fn reconstruct_density_on_grid(
    den: &Denoiser,
    box_lo: Vec<f64>,
    box_hi: Vec<f64>,
    shape: Vec<usize>,
    steps_per_cell: usize,
) -> Result<Reconstruction> {
    let anchor: Vec<usize> = shape.iter().map(|n| (n - 1) / 2).collect();
    reconstruct_density_on_grid_with_anchor(den, box_lo, box_hi, shape, steps_per_cell, &anchor)
}

/// Same, with an explicit anchor node. The anchor only fixes the arbitrary
/// constant of the log density; after normalization the result should not
/// depend on it.
pub fn reconstruct_density_on_grid_with_anchor(
    den: &Denoiser,
    box_lo: Vec<f64>,
    box_hi: Vec<f64>,
    shape: Vec<usize>,
    steps_per_cell: usize,
    anchor: &[usize],
) -> Result<Reconstruction> {
    if shape.len() != den.dim() {
        return Err(Error::DimensionMismatch {
            expected: den.dim(),
            got: shape.len(),
        });
    }
    // Geometry validation via a zero-filled probe grid.
    let probe = GridDensity::from_values(
        box_lo.clone(),
        box_hi.clone(),
        shape.clone(),
        vec![0.0; shape.iter().product()],
    )?;
    if anchor.len() != shape.len() || anchor.iter().zip(&shape).any(|(a, n)| a >= n) {
        return Err(Error::InvalidGrid(format!(
            "anchor {anchor:?} outside grid shape {shape:?}"
        )));
    }
    // At least 8 Simpson subintervals per cell, rounded up to even.
    let steps = {
        let s = steps_per_cell.max(8);
        s + s % 2
    };
    let rule = QuadratureRule::simpson(steps)?;

    let mut log_values = vec![f64::NAN; probe.values().len()];
    match shape.len() {
        1 => {
            let nodes = probe.axis_nodes(0);
            let n = shape[0];
            let a = anchor[0];
            log_values[a] = 0.0;
            for i in a..n - 1 {
                let inc = segment_increment(den, &[nodes[i]], &[nodes[i + 1]], &rule)?;
                let next = log_values[i] + inc;
                if !next.is_finite() {
                    return Err(Error::NotIntegrable { node: vec![i + 1] });
                }
                log_values[i + 1] = next;
            }
            for i in (0..a).rev() {
                let inc = segment_increment(den, &[nodes[i]], &[nodes[i + 1]], &rule)?;
                let prev = log_values[i + 1] - inc;
                if !prev.is_finite() {
                    return Err(Error::NotIntegrable { node: vec![i] });
                }
                log_values[i] = prev;
            }
        }
        2 => {
            let nodes0 = probe.axis_nodes(0);
            let nodes1 = probe.axis_nodes(1);
            let (n0, n1) = (shape[0], shape[1]);
            let (a0, a1) = (anchor[0], anchor[1]);
            let flat = |i: usize, j: usize| i * n1 + j;
            log_values[flat(a0, a1)] = 0.0;
            // Anchor column first (vary axis 0 at fixed column a1)...
            for i in a0..n0 - 1 {
                let inc = segment_increment(
                    den,
                    &[nodes0[i], nodes1[a1]],
                    &[nodes0[i + 1], nodes1[a1]],
                    &rule,
                )?;
                let next = log_values[flat(i, a1)] + inc;
                if !next.is_finite() {
                    return Err(Error::NotIntegrable {
                        node: vec![i + 1, a1],
                    });
                }
                log_values[flat(i + 1, a1)] = next;
            }
            for i in (0..a0).rev() {
                let inc = segment_increment(
                    den,
                    &[nodes0[i], nodes1[a1]],
                    &[nodes0[i + 1], nodes1[a1]],
                    &rule,
                )?;
                let prev = log_values[flat(i + 1, a1)] - inc;
                if !prev.is_finite() {
                    return Err(Error::NotIntegrable { node: vec![i, a1] });
                }
                log_values[flat(i, a1)] = prev;
            }
            // ...then sweep every row outward from the column.
            for i in 0..n0 {
                for j in a1..n1 - 1 {
                    let inc = segment_increment(
                        den,
                        &[nodes0[i], nodes1[j]],
                        &[nodes0[i], nodes1[j + 1]],
                        &rule,
                    )?;
                    let next = log_values[flat(i, j)] + inc;
                    if !next.is_finite() {
                        return Err(Error::NotIntegrable {
                            node: vec![i, j + 1],
                        });
                    }
                    log_values[flat(i, j + 1)] = next;
                }
                for j in (0..a1).rev() {
                    let inc = segment_increment(
                        den,
                        &[nodes0[i], nodes1[j]],
                        &[nodes0[i], nodes1[j + 1]],
                        &rule,
                    )?;
                    let prev = log_values[flat(i, j + 1)] - inc;
                    if !prev.is_finite() {
                        return Err(Error::NotIntegrable { node: vec![i, j] });
                    }
                    log_values[flat(i, j)] = prev;
                }
            }
        }
        _ => unreachable!("grid validation caps the dimension at 2"),
    }

    let shift = log_values
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    let raw: Vec<f64> = log_values.iter().map(|l| (l - shift).exp()).collect();
    let unnormalized = GridDensity::from_values(box_lo, box_hi, shape, raw)?;
    let total = unnormalized.integral();
    if !total.is_finite() || total <= 0.0 {
        return Err(Error::InvalidGrid(format!(
            "reconstructed mass {total} cannot be normalized"
        )));
    }
    let grid = unnormalized.normalized()?;
    Ok(Reconstruction {
        grid,
        log_z: shift + total.ln(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::denoise::score_form_denoiser;
    use crate::mixture::CorruptionModel;
    use crate::testkit;

    fn pt(coords: &[f64]) -> Point {
        Point::new(coords.to_vec()).expect("finite test point")
    }

    /// g(x) = x + (-(x_1), x_0): a pure rotation residual, curl 2, not a
    /// gradient map.
    fn twist_denoiser(sigma: f64) -> Denoiser {
        Denoiser::external(2, sigma, |x: &Point| {
            Point::new(vec![x[0] - x[1], x[1] + x[0]]).expect("finite")
        })
        .expect("valid sigma")
    }

    #[test]
    fn line_integral_on_gaussian_is_quadratic_drop() {
        // Prior N(0, 1), sigma = 1: g(x) - x = -x / 2, so the integral from
        // 0 to t is -t^2 / 4; Simpson is exact on linear integrands.
        let den = score_form_denoiser(
            &testkit::standard_normal_1d(),
            &CorruptionModel::new(1.0).unwrap(),
        )
        .unwrap();
        let contour = Contour::straight(pt(&[0.0]), pt(&[2.0])).unwrap();
        let got = line_integral_log_density(&den, &contour, 8).unwrap();
        assert!((got - (-1.0)).abs() < 1e-12, "got {got}");
    }

    #[test]
    fn line_integral_on_point_pair_matches_closed_form() {
        // g(x) = tanh(x) at sigma = 1; int_0^1 (tanh x - x) dx
        // = ln cosh 1 - 1/2.
        let den = score_form_denoiser(
            &testkit::two_point_1d(),
            &CorruptionModel::new(1.0).unwrap(),
        )
        .unwrap();
        let contour = Contour::straight(pt(&[0.0]), pt(&[1.0])).unwrap();
        let got = line_integral_log_density(&den, &contour, 128).unwrap();
        let expected = 1f64.cosh().ln() - 0.5;
        assert!(
            (got - expected).abs() < 1e-9,
            "got {got}, expected {expected}"
        );
    }

    #[test]
    fn line_integral_matches_log_density_difference_in_2d() {
        let noise = CorruptionModel::new(0.8).unwrap();
        let p = testkit::smooth_2d();
        let den = score_form_denoiser(&p, &noise).unwrap();
        let corrupted = p.corrupt(&noise);
        let (a, b) = (pt(&[-0.5, -0.5]), pt(&[1.0, 0.8]));
        let contour = Contour::straight(a.clone(), b.clone()).unwrap();
        let got = line_integral_log_density(&den, &contour, 128).unwrap();
        let expected = corrupted.log_density(&b).unwrap() - corrupted.log_density(&a).unwrap();
        assert!(
            (got - expected).abs() < 1e-7,
            "got {got}, expected {expected}"
        );
    }

    #[test]
    fn rotational_field_shifts_integral_by_twice_enclosed_area() {
        // Straight (0,0)->(1,0) versus detour through (0.5, 1). The loop
        // between them encloses (signed, clockwise) area -1/2, and the twist
        // residual has constant curl 2, so the integrals differ by -1.
        let den = twist_denoiser(1.0);
        let straight = Contour::straight(pt(&[0.0, 0.0]), pt(&[1.0, 0.0])).unwrap();
        let detour = Contour::new(vec![
            pt(&[0.0, 0.0]),
            pt(&[0.5, 1.0]),
            pt(&[1.0, 0.0]),
        ])
        .unwrap();
        let a = line_integral_log_density(&den, &straight, 16).unwrap();
        let b = line_integral_log_density(&den, &detour, 16).unwrap();
        assert!(a.abs() < 1e-12, "straight integral {a}");
        assert!((b - a + 1.0).abs() < 1e-12, "difference {}", b - a);
    }

    #[test]
    fn curl_residual_detects_rotation_and_clears_gradients() {
        let den = twist_denoiser(1.0);
        let curl = curl_residual(&den, &pt(&[0.3, -0.7]), 1e-4).unwrap();
        assert!((curl - 2.0).abs() < 1e-8, "curl {curl}");

        let noise = CorruptionModel::new(0.8).unwrap();
        let exact = score_form_denoiser(&testkit::smooth_2d(), &noise).unwrap();
        let curl0 = curl_residual(&exact, &pt(&[0.3, -0.4]), 1e-4).unwrap();
        assert!(curl0.abs() < 1e-6, "gradient map curl {curl0}");
    }

    #[test]
    fn path_independence_holds_for_exact_denoiser() {
        let noise = CorruptionModel::new(0.8).unwrap();
        let den = score_form_denoiser(&testkit::smooth_2d(), &noise).unwrap();
        let report = path_independence_check(
            &den,
            &pt(&[-0.5, -0.5]),
            &pt(&[1.0, 0.8]),
            5,
            128,
            11,
        )
        .unwrap();
        assert_eq!(report.values.len(), 6);
        assert!(report.spread < 1e-6, "spread {}", report.spread);
    }

    #[test]
    fn path_independence_flags_rotational_field() {
        let den = twist_denoiser(1.0);
        let report =
            path_independence_check(&den, &pt(&[0.0, 0.0]), &pt(&[1.0, 0.0]), 5, 64, 11).unwrap();
        assert!(report.spread > 1e-2, "spread {}", report.spread);
    }

    #[test]
    fn path_independence_refuses_one_dimension() {
        let den = score_form_denoiser(
            &testkit::standard_normal_1d(),
            &CorruptionModel::new(0.5).unwrap(),
        )
        .unwrap();
        match path_independence_check(&den, &pt(&[0.0]), &pt(&[1.0]), 3, 32, 1) {
            Err(Error::TriviallyPathIndependent) => {}
            other => panic!("expected trivial-case refusal, got {other:?}"),
        }
    }

    #[test]
    fn reconstruct_gaussian_recovers_corrupted_density() {
        let noise = CorruptionModel::new(1.0).unwrap();
        let den = score_form_denoiser(&testkit::standard_normal_1d(), &noise).unwrap();
        let rec =
            reconstruct_density_on_grid(&den, vec![-8.0], vec![8.0], vec![257], 16).unwrap();
        // Corrupted density is N(0, 2).
        let var = 2.0;
        let err = rec.grid.linf_diff_fn(|x| {
            (-x[0] * x[0] / (2.0 * var)).exp() / (2.0 * std::f64::consts::PI * var).sqrt()
        });
        assert!(err < 1e-6, "linf error {err}");
        // log_z = -log p(anchor) with the anchor at x = 0.
        let expected_log_z = 0.5 * (4.0 * std::f64::consts::PI).ln();
        assert!(
            (rec.log_z - expected_log_z).abs() < 1e-6,
            "log_z {} vs {}",
            rec.log_z,
            expected_log_z
        );
    }

    #[test]
    fn reconstruct_point_pair_recovers_bimodal_gaussians() {
        let noise = CorruptionModel::new(1.0).unwrap();
        let p = testkit::two_point_1d();
        let den = score_form_denoiser(&p, &noise).unwrap();
        let rec =
            reconstruct_density_on_grid(&den, vec![-8.0], vec![8.0], vec![257], 16).unwrap();
        let corrupted = p.corrupt(&noise);
        let err = rec.grid.linf_diff_fn(|x| {
            corrupted
                .density(&Point::new(x.to_vec()).unwrap())
                .unwrap()
        });
        assert!(err < 1e-5, "linf error {err}");
    }

    #[test]
    fn reconstruct_2d_mixture_recovers_corrupted_density() {
        let noise = CorruptionModel::new(0.5).unwrap();
        let p = testkit::smooth_2d();
        let den = score_form_denoiser(&p, &noise).unwrap();
        let rec = reconstruct_density_on_grid(
            &den,
            vec![-6.0, -6.0],
            vec![6.0, 6.0],
            vec![129, 129],
            16,
        )
        .unwrap();
        let corrupted = p.corrupt(&noise);
        let err = rec.grid.linf_diff_fn(|x| {
            corrupted
                .density(&Point::new(x.to_vec()).unwrap())
                .unwrap()
        });
        assert!(err < 1e-5, "linf error {err}");
        rec.grid.validate_density(1e-6).unwrap();
    }

    #[test]
    fn reconstruction_does_not_depend_on_anchor() {
        let noise = CorruptionModel::new(0.5).unwrap();
        let den = score_form_denoiser(&testkit::bimodal_1d(), &noise).unwrap();
        let a = reconstruct_density_on_grid_with_anchor(
            &den,
            vec![-7.0],
            vec![7.0],
            vec![257],
            16,
            &[128],
        )
        .unwrap();
        let b = reconstruct_density_on_grid_with_anchor(
            &den,
            vec![-7.0],
            vec![7.0],
            vec![257],
            16,
            &[40],
        )
        .unwrap();
        let diff = a.grid.linf_diff(&b.grid).unwrap();
        assert!(diff < 1e-8, "anchor sensitivity {diff}");
    }

    #[test]
    fn reconstruction_converges_in_steps() {
        let noise = CorruptionModel::new(0.5).unwrap();
        let den = score_form_denoiser(&testkit::bimodal_1d(), &noise).unwrap();
        let coarse =
            reconstruct_density_on_grid(&den, vec![-7.0], vec![7.0], vec![257], 16).unwrap();
        let fine =
            reconstruct_density_on_grid(&den, vec![-7.0], vec![7.0], vec![257], 32).unwrap();
        let diff = coarse.grid.linf_diff(&fine.grid).unwrap();
        assert!(diff < 1e-9, "step sensitivity {diff}");
    }

    #[test]
    fn reconstruction_reports_overflow_node() {
        // A residual so large the telescoped log overflows within a few
        // cells (1e308 * 0.125-wide cells / sigma^2 = 5e307 per step).
        let den = Denoiser::external(1, 0.5, |x: &Point| {
            Point::new(vec![x[0] + 1e308]).expect("finite")
        })
        .unwrap();
        match reconstruct_density_on_grid(&den, vec![-1.0], vec![1.0], vec![17], 8) {
            Err(Error::NotIntegrable { node }) => assert_eq!(node.len(), 1),
            other => panic!("expected integrability failure, got {other:?}"),
        }
    }

    #[test]
    fn grid_density_validation_and_io() {
        assert!(GridDensity::from_values(vec![0.0], vec![1.0], vec![3], vec![1.0; 2]).is_err());
        assert!(GridDensity::from_values(vec![1.0], vec![0.0], vec![3], vec![1.0; 3]).is_err());
        assert!(GridDensity::from_values(vec![0.0], vec![1.0], vec![1], vec![1.0]).is_err());
        assert!(
            GridDensity::from_values(vec![0.0], vec![1.0], vec![3], vec![1.0, f64::NAN, 1.0])
                .is_err()
        );

        let g = GridDensity::tabulate(
            &testkit::standard_normal_1d().corrupt(&CorruptionModel::new(1.0).unwrap()),
            vec![-9.0],
            vec![9.0],
            vec![513],
        )
        .unwrap();
        assert!((g.integral() - 1.0).abs() < 1e-9, "mass {}", g.integral());
        g.validate_density(1e-6).unwrap();
        assert_eq!(g.linf_diff(&g).unwrap(), 0.0);

        let mut csv = Vec::new();
        g.write_csv(&mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("axis0,value"));
        assert_eq!(lines.count(), 513);

        // Mismatched geometry refuses comparison.
        let other = GridDensity::tabulate_fn(vec![-9.0], vec![9.0], vec![257], |_| 1.0).unwrap();
        assert!(g.linf_diff(&other).is_err());
    }

    #[test]
    fn contour_validation() {
        assert!(Contour::new(vec![pt(&[0.0])]).is_err());
        assert!(Contour::new(vec![pt(&[0.0]), pt(&[0.0])]).is_err());
        assert!(Contour::new(vec![pt(&[0.0]), pt(&[1.0, 2.0])]).is_err());
        let c = Contour::new(vec![pt(&[0.0]), pt(&[1.0]), pt(&[0.5])]).unwrap();
        assert_eq!(c.vertices().len(), 3);
        assert_eq!(c.dim(), 1);
    }
}
