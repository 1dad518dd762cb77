//! Experiment configuration: JSON schema, validation, and CLI overrides.
//!
//! A run is described by a single JSON file.  The mixture may be given
//! inline or as a path to a separate mixture file (resolved relative to the
//! config file's directory).  Command-line flags can override the seed, the
//! noise levels, and the output directory; the fully resolved configuration
//! is echoed to `resolved_config.json` in the output directory so every
//! artifact set is self-describing.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use scorelab::mixture::{GaussianMixture, MixtureSpec};

use crate::CliError;

/// Default RNG seed when the config omits one.
pub const DEFAULT_SEED: u64 = 42;

/// Top-level experiment description, deserialized from JSON.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Data distribution: inline component list or path to a mixture file.
    pub mixture: MixtureRef,
    /// Noise level(s): a single number or an ascending list.
    pub sigma: SigmaSpec,
    /// RNG seed for every stochastic step (sampling, contours, fields).
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Evaluation grid; omitted fields fall back to per-command defaults.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridConfig>,
    /// Where artifacts are written; `--out` overrides, default `scorelab-out`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    /// Resolution and effort knobs shared across commands.
    #[serde(default)]
    pub knobs: Knobs,
    /// Pass/fail thresholds for each command's check.
    #[serde(default)]
    pub tolerances: Tolerances,
    /// Fault-injection lever: evaluate the candidate denoiser at this noise
    /// level while the oracle keeps the configured one.  With a genuinely
    /// different value the theorem check must fail, which demonstrates that
    /// the check has teeth.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub debug_sigma_mismatch: Option<f64>,
}

fn default_seed() -> u64 {
    DEFAULT_SEED
}

/// Mixture source: a path string or an inline spec.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MixtureRef {
    /// Path to a mixture JSON file, relative to the config file.
    Path(String),
    /// Inline mixture description.
    Inline(MixtureSpec),
}

/// Noise levels: scalar or ascending sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SigmaSpec {
    One(f64),
    Sweep(Vec<f64>),
}

impl SigmaSpec {
    fn to_list(&self) -> Vec<f64> {
        match self {
            SigmaSpec::One(s) => vec![*s],
            SigmaSpec::Sweep(v) => v.clone(),
        }
    }
}

/// Explicit evaluation grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    /// Lower corner, one entry per axis.
    pub box_lo: Vec<f64>,
    /// Upper corner, one entry per axis.
    pub box_hi: Vec<f64>,
    /// Nodes per axis.
    pub shape: Vec<usize>,
}

/// Effort and resolution knobs.  Every field has a sensible default so an
/// empty `knobs` object is valid.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Knobs {
    /// Base quadrature order per axis for the integral oracle.
    pub nodes: usize,
    /// Simpson subintervals per grid cell or contour segment; `null` picks a
    /// per-command default (16 for grids, 128 for contours).
    pub steps: Option<usize>,
    /// Tikhonov regularization for deconvolution.
    pub reg: f64,
    /// Number of random perturbation fields for the optimality probe.
    pub trials: usize,
    /// Perturbation amplitude for the optimality probe.
    pub epsilon: f64,
    /// Monte Carlo sample count for the optimality probe.
    pub samples: usize,
    /// Evaluation points per noise level for denoiser checks.
    pub eval_points: usize,
    /// Number of random detour contours for the path check.
    pub n_contours: usize,
    /// End point of the path check's contours; `null` picks a default.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<Vec<f64>>,
}

impl Default for Knobs {
    fn default() -> Self {
        Knobs {
            nodes: 64,
            steps: None,
            reg: 1e-12,
            trials: 20,
            epsilon: 1e-3,
            samples: 50_000,
            eval_points: 20,
            n_contours: 5,
            endpoint: None,
        }
    }
}

/// Pass/fail thresholds.  Defaults match the acceptance targets.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// Max |denoiser - oracle| allowed by `theorem-check`.
    pub theorem_tol: f64,
    /// Minimum log-log slope required by `limit-sweep`.
    pub slope_min: f64,
    /// Max sup-norm error allowed for a reconstructed corrupted density.
    pub linf_tol: f64,
    /// Max sup-norm error allowed for the deconvolved clean density.
    pub linf_clean_tol: f64,
    /// Max probability mass the deconvolver may clip as negative.
    pub clipped_mass_tol: f64,
    /// Max spread across contours allowed by `path-check`.
    pub path_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            theorem_tol: 1e-7,
            slope_min: 3.5,
            linf_tol: 1e-4,
            linf_clean_tol: 5e-3,
            clipped_mass_tol: 1e-4,
            path_tol: 1e-6,
        }
    }
}

/// A validated, override-applied configuration plus the built mixture.
pub struct Loaded {
    /// Normalized config (inline mixture, sigma as a list) for echoing.
    pub cfg: ExperimentConfig,
    /// The data distribution.
    pub gmm: GaussianMixture,
    /// Ascending noise levels.
    pub sigmas: Vec<f64>,
    /// Output directory after overrides.
    pub out_dir: PathBuf,
}

/// Command-line overrides shared by every subcommand.
#[derive(Debug, Clone, clap::Args)]
pub struct RunArgs {
    /// Experiment configuration file (JSON).
    #[arg(long, value_name = "FILE")]
    pub config: PathBuf,
    /// Override the RNG seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Override the noise levels: comma-separated ascending list.
    #[arg(long, value_name = "LIST")]
    pub sigma: Option<String>,
    /// Override the output directory.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

/// Parse `--sigma` lists like `0.1,0.5,1.0`.
fn parse_sigma_list(text: &str) -> Result<Vec<f64>, CliError> {
    let mut out = Vec::new();
    for piece in text.split(',') {
        let trimmed = piece.trim();
        let value: f64 = trimmed
            .parse()
            .map_err(|_| CliError::Config(format!("invalid sigma entry {trimmed:?}")))?;
        out.push(value);
    }
    Ok(out)
}

fn validate_sigmas(sigmas: &[f64]) -> Result<(), CliError> {
    if sigmas.is_empty() {
        return Err(CliError::Config("sigma list is empty".into()));
    }
    for &s in sigmas {
        if !s.is_finite() || s <= 0.0 {
            return Err(CliError::Config(format!(
                "sigma must be finite and positive, got {s}"
            )));
        }
    }
    for pair in sigmas.windows(2) {
        if pair[1] <= pair[0] {
            return Err(CliError::Config(format!(
                "sigma list must be strictly ascending, got {} after {}",
                pair[1], pair[0]
            )));
        }
    }
    Ok(())
}

fn validate_knobs(knobs: &Knobs) -> Result<(), CliError> {
    if knobs.nodes < 2 || knobs.nodes > 256 {
        return Err(CliError::Config(format!(
            "knobs.nodes must lie in 2..=256, got {}",
            knobs.nodes
        )));
    }
    if let Some(steps) = knobs.steps {
        if steps < 2 {
            return Err(CliError::Config(format!(
                "knobs.steps must be at least 2, got {steps}"
            )));
        }
    }
    if !knobs.reg.is_finite() || knobs.reg < 0.0 {
        return Err(CliError::Config(format!(
            "knobs.reg must be finite and non-negative, got {}",
            knobs.reg
        )));
    }
    if knobs.trials == 0 {
        return Err(CliError::Config("knobs.trials must be positive".into()));
    }
    if !knobs.epsilon.is_finite() || knobs.epsilon < 0.0 {
        return Err(CliError::Config(format!(
            "knobs.epsilon must be finite and non-negative, got {}",
            knobs.epsilon
        )));
    }
    if knobs.samples < 2 {
        return Err(CliError::Config(format!(
            "knobs.samples must be at least 2, got {}",
            knobs.samples
        )));
    }
    if knobs.eval_points == 0 {
        return Err(CliError::Config("knobs.eval_points must be positive".into()));
    }
    if knobs.n_contours == 0 {
        return Err(CliError::Config("knobs.n_contours must be positive".into()));
    }
    Ok(())
}

fn validate_tolerances(tol: &Tolerances) -> Result<(), CliError> {
    let entries = [
        ("theorem_tol", tol.theorem_tol),
        ("linf_tol", tol.linf_tol),
        ("linf_clean_tol", tol.linf_clean_tol),
        ("clipped_mass_tol", tol.clipped_mass_tol),
        ("path_tol", tol.path_tol),
    ];
    for (name, value) in entries {
        if !value.is_finite() || value <= 0.0 {
            return Err(CliError::Config(format!(
                "tolerances.{name} must be finite and positive, got {value}"
            )));
        }
    }
    if !tol.slope_min.is_finite() {
        return Err(CliError::Config(format!(
            "tolerances.slope_min must be finite, got {}",
            tol.slope_min
        )));
    }
    Ok(())
}

/// Load the config file, apply CLI overrides, build the mixture, and
/// validate everything that does not depend on the specific subcommand.
pub fn load(args: &RunArgs) -> Result<Loaded, CliError> {
    let text = fs::read_to_string(&args.config).map_err(|e| {
        CliError::Config(format!("cannot read {}: {e}", args.config.display()))
    })?;
    let mut cfg: ExperimentConfig = serde_json::from_str(&text).map_err(|e| {
        CliError::Config(format!("cannot parse {}: {e}", args.config.display()))
    })?;

    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(list) = &args.sigma {
        cfg.sigma = SigmaSpec::Sweep(parse_sigma_list(list)?);
    }
    if let Some(out) = &args.out {
        cfg.output_dir = Some(out.clone());
    }

    let config_dir = args
        .config
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."));

    let gmm = match &cfg.mixture {
        MixtureRef::Path(rel) => {
            let full = config_dir.join(rel);
            GaussianMixture::from_json_file(&full)
                .map_err(|e| CliError::Config(format!("mixture file: {e}")))?
        }
        MixtureRef::Inline(spec) => spec
            .build()
            .map_err(|e| CliError::Config(format!("inline mixture: {e}")))?,
    };
    // Echo the mixture inline so resolved_config.json is self-contained.
    cfg.mixture = MixtureRef::Inline(gmm.to_spec());

    let sigmas = cfg.sigma.to_list();
    validate_sigmas(&sigmas)?;
    cfg.sigma = SigmaSpec::Sweep(sigmas.clone());

    validate_knobs(&cfg.knobs)?;
    validate_tolerances(&cfg.tolerances)?;

    if let Some(bad) = cfg.debug_sigma_mismatch {
        if !bad.is_finite() || bad <= 0.0 {
            return Err(CliError::Config(format!(
                "debug_sigma_mismatch must be finite and positive, got {bad}"
            )));
        }
    }

    let out_dir = cfg
        .output_dir
        .clone()
        .unwrap_or_else(|| PathBuf::from("scorelab-out"));

    Ok(Loaded {
        cfg,
        gmm,
        sigmas,
        out_dir,
    })
}

/// Resolve the evaluation grid for grid-based commands: use the explicit
/// config if present, otherwise cover the corrupted distribution's mass box
/// at ten standard deviations with a per-command default shape.
pub fn resolve_grid(
    loaded: &Loaded,
    sigma: f64,
    default_shape: &[usize],
    require_power_of_two: bool,
) -> Result<(Vec<f64>, Vec<f64>, Vec<usize>), CliError> {
    let dim = loaded.gmm.dim();
    let (lo, hi, shape) = match &loaded.cfg.grid {
        Some(g) => {
            if g.box_lo.len() != dim || g.box_hi.len() != dim || g.shape.len() != dim {
                return Err(CliError::Config(format!(
                    "grid axes must match the mixture dimension {dim}"
                )));
            }
            for axis in 0..dim {
                if !g.box_lo[axis].is_finite()
                    || !g.box_hi[axis].is_finite()
                    || g.box_lo[axis] >= g.box_hi[axis]
                {
                    return Err(CliError::Config(format!(
                        "grid box on axis {axis} must satisfy lo < hi with finite bounds"
                    )));
                }
                if g.shape[axis] < 2 {
                    return Err(CliError::Config(format!(
                        "grid shape on axis {axis} must be at least 2"
                    )));
                }
            }
            (g.box_lo.clone(), g.box_hi.clone(), g.shape.clone())
        }
        None => {
            let noise = scorelab::mixture::CorruptionModel::new(sigma)
                .map_err(|e| CliError::Config(e.to_string()))?;
            let (lo, hi) = loaded.gmm.corrupt(&noise).mass_box(10.0);
            (lo, hi, default_shape.to_vec())
        }
    };
    if require_power_of_two {
        for &n in &shape {
            if !n.is_power_of_two() || n < 16 {
                return Err(CliError::Config(format!(
                    "spectral commands need a power-of-two grid shape of at least 16 per axis, got {n}"
                )));
            }
        }
    }
    Ok((lo, hi, shape))
}
