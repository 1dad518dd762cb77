//! The laboratory commands.
//!
//! Each command loads a config, writes `resolved_config.json` plus its own
//! artifacts into the output directory, prints a one-line PASS/FAIL summary
//! to stdout, and returns whether its check passed.  Configuration problems
//! surface as `CliError::Config` (exit 2) before any heavy work starts;
//! numerical failures mid-run surface as `CliError::Runtime` (exit 3); a
//! check that ran to completion but missed its tolerance is a `false`
//! return (exit 1), not an error.

use serde::Serialize;

use scorelab::deconv::full_chain;
use scorelab::denoise::{
    oracle_denoiser_quadrature, perturbation_probe, score_form_denoiser, small_noise_denoiser,
};
use scorelab::mixture::{CorruptionModel, Point};
use scorelab::reconstruct::{path_independence_check, reconstruct_density_on_grid};

use crate::config::{resolve_grid, GridConfig, Loaded};
use crate::report::{csv_float, Workspace};
use crate::CliError;

fn runtime(e: scorelab::Error) -> CliError {
    CliError::Runtime(e.to_string())
}

fn corruption(sigma: f64) -> Result<CorruptionModel, CliError> {
    CorruptionModel::new(sigma).map_err(|e| CliError::Config(e.to_string()))
}

/// Commands that study a single noise level reject sweeps up front.
fn scalar_sigma(loaded: &Loaded, command: &str) -> Result<f64, CliError> {
    match loaded.sigmas.as_slice() {
        [s] => Ok(*s),
        more => Err(CliError::Config(format!(
            "{command} needs exactly one noise level, got {}",
            more.len()
        ))),
    }
}

/// Create the output directory and echo the resolved configuration.
fn open_workspace(loaded: &Loaded, command: &str) -> Result<Workspace, CliError> {
    let mut ws = Workspace::create(&loaded.out_dir)?;
    ws.log(&format!("{command} started"))?;
    ws.write_json("resolved_config.json", &loaded.cfg)?;
    Ok(ws)
}

fn max_abs_gap(a: &Point, b: &Point) -> f64 {
    a.coords()
        .iter()
        .zip(b.coords())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn verdict(pass: bool) -> &'static str {
    if pass {
        "PASS"
    } else {
        "FAIL"
    }
}

/// Least-squares slope of `y` against `x`.
fn least_squares_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let cov: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let var: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    cov / var
}

#[derive(Serialize)]
struct TheoremReport<'a> {
    command: &'static str,
    sigmas: &'a [f64],
    n_points: usize,
    quadrature_orders: [usize; 2],
    #[serde(skip_serializing_if = "Option::is_none")]
    debug_sigma_mismatch: Option<f64>,
    max_abs_diff: f64,
    max_resolution_delta: f64,
    tol: f64,
    pass: bool,
}

/// Compare the closed-form denoiser against the Bayes-integral oracle at
/// sampled noisy points, over every configured noise level.
pub fn theorem_check(loaded: Loaded) -> Result<bool, CliError> {
    let gmm = &loaded.gmm;
    let dim = gmm.dim();
    if dim > 2 {
        return Err(CliError::Config(format!(
            "theorem-check uses a quadrature oracle and covers one and two dimensions, mixture has d = {dim}"
        )));
    }
    let n_points = loaded.cfg.knobs.eval_points;
    let n1 = loaded.cfg.knobs.nodes;
    let n2 = (2 * n1).min(256).max(n1);
    let tol = loaded.cfg.tolerances.theorem_tol;

    let mut ws = open_workspace(&loaded, "theorem-check")?;

    let mut csv = String::from("sigma");
    for j in 0..dim {
        csv.push_str(&format!(",x{j}"));
    }
    for j in 0..dim {
        csv.push_str(&format!(",denoised{j}"));
    }
    for j in 0..dim {
        csv.push_str(&format!(",oracle{j}"));
    }
    csv.push_str(",max_abs_diff\n");

    let mut max_abs_diff = 0.0f64;
    let mut max_resolution_delta = 0.0f64;
    for &sigma in &loaded.sigmas {
        let noise = corruption(sigma)?;
        let denoiser_noise = corruption(loaded.cfg.debug_sigma_mismatch.unwrap_or(sigma))?;
        let den = score_form_denoiser(gmm, &denoiser_noise).map_err(runtime)?;
        let corrupted = gmm.corrupt(&noise);
        let points = corrupted.sample(n_points, loaded.cfg.seed);
        for xt in &points {
            let coarse = oracle_denoiser_quadrature(gmm, &noise, xt, n1).map_err(runtime)?;
            let oracle = if n2 > n1 {
                oracle_denoiser_quadrature(gmm, &noise, xt, n2).map_err(runtime)?
            } else {
                coarse.clone()
            };
            max_resolution_delta = max_resolution_delta.max(max_abs_gap(&coarse, &oracle));
            let g = den.eval(xt).map_err(runtime)?;
            let diff = max_abs_gap(&g, &oracle);
            max_abs_diff = max_abs_diff.max(diff);

            csv.push_str(&csv_float(sigma));
            for v in xt.coords() {
                csv.push(',');
                csv.push_str(&csv_float(*v));
            }
            for v in g.coords() {
                csv.push(',');
                csv.push_str(&csv_float(*v));
            }
            for v in oracle.coords() {
                csv.push(',');
                csv.push_str(&csv_float(*v));
            }
            csv.push(',');
            csv.push_str(&csv_float(diff));
            csv.push('\n');
        }
        ws.log(&format!("sigma {sigma}: running max gap {max_abs_diff:.3e}"))?;
    }
    ws.write_text("theorem_check.csv", &csv)?;

    let pass = max_abs_diff <= tol;
    ws.write_json(
        "theorem_report.json",
        &TheoremReport {
            command: "theorem-check",
            sigmas: &loaded.sigmas,
            n_points,
            quadrature_orders: [n1, n2],
            debug_sigma_mismatch: loaded.cfg.debug_sigma_mismatch,
            max_abs_diff,
            max_resolution_delta,
            tol,
            pass,
        },
    )?;
    ws.log(&format!("finished: pass = {pass}"))?;
    println!(
        "theorem-check: {} (max |denoiser - oracle| = {max_abs_diff:.3e}, tolerance {tol:.1e}, {} noise levels x {n_points} points)",
        verdict(pass),
        loaded.sigmas.len()
    );
    Ok(pass)
}

#[derive(Serialize)]
struct LimitSweepReport<'a> {
    command: &'static str,
    sigmas: &'a [f64],
    n_points: usize,
    max_gaps: &'a [f64],
    slope: f64,
    slope_min: f64,
    pass: bool,
}

/// Measure how fast the clean-score shortcut approaches the exact denoiser
/// as the noise level shrinks, and fit the log-log rate.
pub fn limit_sweep(loaded: Loaded) -> Result<bool, CliError> {
    let gmm = &loaded.gmm;
    if loaded.sigmas.len() < 3 {
        return Err(CliError::Config(format!(
            "limit-sweep fits a rate and needs at least 3 noise levels, got {}",
            loaded.sigmas.len()
        )));
    }
    if gmm.has_point_mass() {
        return Err(CliError::Config(
            "limit-sweep compares against the clean score, which point-mass components do not have".into(),
        ));
    }
    let n_points = loaded.cfg.knobs.eval_points;
    let slope_min = loaded.cfg.tolerances.slope_min;

    let mut ws = open_workspace(&loaded, "limit-sweep")?;

    // Fixed evaluation points drawn once from the clean mixture, so the only
    // thing that varies across the sweep is the noise level itself.
    let points = gmm.sample(n_points, loaded.cfg.seed);

    let mut csv = String::from("sigma,max_gap\n");
    let mut gaps = Vec::with_capacity(loaded.sigmas.len());
    let mut log_sigma = Vec::with_capacity(loaded.sigmas.len());
    let mut log_gap = Vec::with_capacity(loaded.sigmas.len());
    for &sigma in &loaded.sigmas {
        let noise = corruption(sigma)?;
        let exact = score_form_denoiser(gmm, &noise).map_err(runtime)?;
        let approx = small_noise_denoiser(gmm, &noise).map_err(runtime)?;
        let mut gap = 0.0f64;
        for xt in &points {
            let a = approx.eval(xt).map_err(runtime)?;
            let e = exact.eval(xt).map_err(runtime)?;
            gap = gap.max(max_abs_gap(&a, &e));
        }
        if !gap.is_finite() || gap <= 0.0 {
            return Err(CliError::Runtime(format!(
                "degenerate gap {gap} at sigma {sigma}; the rate fit needs strictly positive gaps"
            )));
        }
        csv.push_str(&csv_float(sigma));
        csv.push(',');
        csv.push_str(&csv_float(gap));
        csv.push('\n');
        gaps.push(gap);
        log_sigma.push(sigma.ln());
        log_gap.push(gap.ln());
        ws.log(&format!("sigma {sigma}: max gap {gap:.3e}"))?;
    }
    ws.write_text("limit_sweep.csv", &csv)?;

    let slope = least_squares_slope(&log_sigma, &log_gap);
    let pass = slope.is_finite() && slope >= slope_min;
    ws.write_json(
        "limit_report.json",
        &LimitSweepReport {
            command: "limit-sweep",
            sigmas: &loaded.sigmas,
            n_points,
            max_gaps: &gaps,
            slope,
            slope_min,
            pass,
        },
    )?;
    ws.log(&format!("finished: pass = {pass}"))?;
    println!(
        "limit-sweep: {} (log-log slope = {slope:.3}, required >= {slope_min}, {} noise levels)",
        verdict(pass),
        loaded.sigmas.len()
    );
    Ok(pass)
}

#[derive(Serialize)]
struct ReconstructReport {
    command: &'static str,
    sigma: f64,
    box_lo: Vec<f64>,
    box_hi: Vec<f64>,
    shape: Vec<usize>,
    steps_per_cell: usize,
    log_z: f64,
    mass: f64,
    linf_vs_truth: f64,
    tol: f64,
    pass: bool,
}

/// Rebuild the noisy density from line integrals of the denoiser and score
/// it against the closed form.
pub fn reconstruct(mut loaded: Loaded) -> Result<bool, CliError> {
    let sigma = scalar_sigma(&loaded, "reconstruct")?;
    let dim = loaded.gmm.dim();
    let default_shape: &[usize] = match dim {
        1 => &[513],
        2 => &[129, 129],
        _ => {
            return Err(CliError::Config(format!(
                "grid reconstruction covers one and two dimensions, mixture has d = {dim}"
            )))
        }
    };
    let (box_lo, box_hi, shape) = resolve_grid(&loaded, sigma, default_shape, false)?;
    let steps = loaded.cfg.knobs.steps.unwrap_or(16);
    let tol = loaded.cfg.tolerances.linf_tol;

    loaded.cfg.grid = Some(GridConfig {
        box_lo: box_lo.clone(),
        box_hi: box_hi.clone(),
        shape: shape.clone(),
    });
    loaded.cfg.knobs.steps = Some(steps);
    let mut ws = open_workspace(&loaded, "reconstruct")?;

    let noise = corruption(sigma)?;
    let den = score_form_denoiser(&loaded.gmm, &noise).map_err(runtime)?;
    let rec = reconstruct_density_on_grid(
        &den,
        box_lo.clone(),
        box_hi.clone(),
        shape.clone(),
        steps,
    )
    .map_err(runtime)?;

    let corrupted = loaded.gmm.corrupt(&noise);
    let linf_vs_truth = rec.grid.linf_diff_fn(|x| {
        let p = Point::new(x.to_vec()).expect("grid nodes are finite");
        corrupted
            .density(&p)
            .expect("corrupted mixture density is defined everywhere")
    });
    let mass = rec.grid.integral();

    ws.write_grid("reconstructed.csv", &rec.grid)?;
    let pass = linf_vs_truth <= tol;
    ws.write_json(
        "reconstruct_report.json",
        &ReconstructReport {
            command: "reconstruct",
            sigma,
            box_lo,
            box_hi,
            shape,
            steps_per_cell: steps,
            log_z: rec.log_z,
            mass,
            linf_vs_truth,
            tol,
            pass,
        },
    )?;
    ws.log(&format!("finished: pass = {pass}"))?;
    println!(
        "reconstruct: {} (sup-norm error = {linf_vs_truth:.3e} vs tolerance {tol:.1e}, normalizer log Z = {:.6})",
        verdict(pass),
        rec.log_z
    );
    Ok(pass)
}

#[derive(Serialize)]
struct DeconvolveReport {
    command: &'static str,
    sigma: f64,
    reg: f64,
    box_lo: Vec<f64>,
    box_hi: Vec<f64>,
    shape: Vec<usize>,
    steps_per_cell: usize,
    linf_corrupted: f64,
    linf_clean: f64,
    clipped_mass: f64,
    linf_tol: f64,
    linf_clean_tol: f64,
    clipped_mass_tol: f64,
    pass: bool,
}

/// Run the whole pipeline: reconstruct the noisy density from the denoiser,
/// then strip the noise by regularized spectral deconvolution, scoring both
/// stages against closed forms.
pub fn deconvolve(mut loaded: Loaded) -> Result<bool, CliError> {
    let sigma = scalar_sigma(&loaded, "deconvolve")?;
    if loaded.gmm.dim() != 1 {
        return Err(CliError::Config(format!(
            "the deconvolution chain runs in one dimension, mixture has d = {}",
            loaded.gmm.dim()
        )));
    }
    let (box_lo, box_hi, shape) = resolve_grid(&loaded, sigma, &[1024], true)?;
    let steps = loaded.cfg.knobs.steps.unwrap_or(16);
    let reg = loaded.cfg.knobs.reg;
    let tols = loaded.cfg.tolerances.clone();

    loaded.cfg.grid = Some(GridConfig {
        box_lo: box_lo.clone(),
        box_hi: box_hi.clone(),
        shape: shape.clone(),
    });
    loaded.cfg.knobs.steps = Some(steps);
    let mut ws = open_workspace(&loaded, "deconvolve")?;

    let noise = corruption(sigma)?;
    let chain = full_chain(
        &loaded.gmm,
        &noise,
        box_lo[0],
        box_hi[0],
        shape[0],
        steps,
        reg,
    )
    .map_err(|e| match e {
        scorelab::Error::InvalidArgument(_) => CliError::Config(e.to_string()),
        other => CliError::Runtime(other.to_string()),
    })?;

    ws.write_grid("reconstructed.csv", &chain.reconstructed.grid)?;
    ws.write_grid("deconvolved.csv", &chain.clean_grid)?;

    let r = &chain.report;
    let pass = r.linf_corrupted <= tols.linf_tol
        && r.linf_clean <= tols.linf_clean_tol
        && r.clipped_mass <= tols.clipped_mass_tol;
    ws.write_json(
        "deconvolve_report.json",
        &DeconvolveReport {
            command: "deconvolve",
            sigma,
            reg,
            box_lo,
            box_hi,
            shape,
            steps_per_cell: steps,
            linf_corrupted: r.linf_corrupted,
            linf_clean: r.linf_clean,
            clipped_mass: r.clipped_mass,
            linf_tol: tols.linf_tol,
            linf_clean_tol: tols.linf_clean_tol,
            clipped_mass_tol: tols.clipped_mass_tol,
            pass,
        },
    )?;
    ws.log(&format!("finished: pass = {pass}"))?;
    println!(
        "deconvolve: {} (noisy-stage error = {:.3e}, clean-stage error = {:.3e}, clipped mass = {:.3e})",
        verdict(pass),
        r.linf_corrupted,
        r.linf_clean,
        r.clipped_mass
    );
    Ok(pass)
}

#[derive(Serialize)]
struct ProbeReport {
    command: &'static str,
    sigma: f64,
    epsilon: f64,
    n_fields: usize,
    n_samples: usize,
    base_mse: f64,
    n_violations: usize,
    pass: bool,
}

/// Try to beat the exact denoiser with seeded smooth perturbations under
/// common random pairs; any significant win is a violation.
pub fn mse_probe(loaded: Loaded) -> Result<bool, CliError> {
    let sigma = scalar_sigma(&loaded, "mse-probe")?;
    let dim = loaded.gmm.dim();
    if dim > 2 {
        return Err(CliError::Config(format!(
            "mse-probe perturbation fields cover one and two dimensions, mixture has d = {dim}"
        )));
    }
    let knobs = &loaded.cfg.knobs;
    let (trials, epsilon, samples) = (knobs.trials, knobs.epsilon, knobs.samples);

    let mut ws = open_workspace(&loaded, "mse-probe")?;

    let noise = corruption(sigma)?;
    let report = perturbation_probe(
        &loaded.gmm,
        &noise,
        trials,
        epsilon,
        samples,
        loaded.cfg.seed,
    )
    .map_err(runtime)?;

    let mut csv = String::from("field,margin,std_error,violation\n");
    for (i, (margin, se)) in report
        .margins
        .iter()
        .zip(&report.margin_std_errors)
        .enumerate()
    {
        let violation = margin < &(-5.0 * se);
        csv.push_str(&format!(
            "{i},{},{},{}\n",
            csv_float(*margin),
            csv_float(*se),
            u8::from(violation)
        ));
    }
    ws.write_text("margins.csv", &csv)?;

    let pass = report.n_violations == 0;
    ws.write_json(
        "probe_report.json",
        &ProbeReport {
            command: "mse-probe",
            sigma,
            epsilon: report.epsilon,
            n_fields: report.n_fields,
            n_samples: report.n_samples,
            base_mse: report.base_mse,
            n_violations: report.n_violations,
            pass,
        },
    )?;
    ws.log(&format!("finished: pass = {pass}"))?;
    println!(
        "mse-probe: {} ({} violations across {} fields, base risk = {:.6})",
        verdict(pass),
        report.n_violations,
        report.n_fields,
        report.base_mse
    );
    Ok(pass)
}

#[derive(Serialize)]
struct PathReport {
    command: &'static str,
    sigma: f64,
    start: Vec<f64>,
    end: Vec<f64>,
    n_contours: usize,
    steps_per_segment: usize,
    values: Vec<f64>,
    spread: f64,
    tol: f64,
    pass: bool,
}

/// Integrate the denoiser's residual along the straight contour and seeded
/// detours between two points; a gradient field gives every contour the
/// same value.
pub fn path_check(mut loaded: Loaded) -> Result<bool, CliError> {
    let sigma = scalar_sigma(&loaded, "path-check")?;
    let dim = loaded.gmm.dim();
    if dim < 2 {
        return Err(CliError::Config(
            "path-check is vacuous in one dimension, where every contour between two points gives the same integral".into(),
        ));
    }
    let end_coords = loaded
        .cfg
        .knobs
        .endpoint
        .clone()
        .unwrap_or_else(|| vec![1.0; dim]);
    if end_coords.len() != dim {
        return Err(CliError::Config(format!(
            "knobs.endpoint has {} coordinates, mixture has dimension {dim}",
            end_coords.len()
        )));
    }
    let end = Point::new(end_coords.clone()).map_err(|e| CliError::Config(e.to_string()))?;
    let start = Point::origin(dim);
    if end == start {
        return Err(CliError::Config(
            "knobs.endpoint must differ from the origin, where every contour starts".into(),
        ));
    }
    let steps = loaded.cfg.knobs.steps.unwrap_or(128);
    let n_contours = loaded.cfg.knobs.n_contours;
    let tol = loaded.cfg.tolerances.path_tol;

    loaded.cfg.knobs.steps = Some(steps);
    loaded.cfg.knobs.endpoint = Some(end_coords.clone());
    let mut ws = open_workspace(&loaded, "path-check")?;

    let noise = corruption(sigma)?;
    let den = score_form_denoiser(&loaded.gmm, &noise).map_err(runtime)?;
    let report = path_independence_check(&den, &start, &end, n_contours, steps, loaded.cfg.seed)
        .map_err(runtime)?;

    let mut csv = String::from("contour,integral\n");
    for (i, v) in report.values.iter().enumerate() {
        csv.push_str(&format!("{i},{}\n", csv_float(*v)));
    }
    ws.write_text("contour_integrals.csv", &csv)?;

    let pass = report.spread <= tol;
    ws.write_json(
        "path_report.json",
        &PathReport {
            command: "path-check",
            sigma,
            start: start.coords().to_vec(),
            end: end_coords,
            n_contours,
            steps_per_segment: steps,
            values: report.values.clone(),
            spread: report.spread,
            tol,
            pass,
        },
    )?;
    ws.log(&format!("finished: pass = {pass}"))?;
    println!(
        "path-check: {} (spread across {} contours = {:.3e}, tolerance {tol:.1e})",
        verdict(pass),
        report.values.len(),
        report.spread
    );
    Ok(pass)
}
