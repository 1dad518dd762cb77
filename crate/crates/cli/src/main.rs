//! `scorelab` command-line laboratory.
//!
//! Every subcommand takes an experiment config (JSON), runs one study of an
//! exactly known Gaussian-mixture setup, writes artifacts to an output
//! directory, and prints a one-line PASS/FAIL summary.
//!
//! Exit codes: 0 when the study's check passed, 1 when it ran to completion
//! but failed its tolerance, 2 for configuration or usage errors, 3 for
//! runtime failures.

mod commands;
mod config;
mod report;

use clap::{Parser, Subcommand};

use config::RunArgs;

/// Errors that abort a run, tagged by whose fault they are.
#[derive(Debug)]
pub enum CliError {
    /// Bad config file, bad flag values, or a command/mixture mismatch.
    Config(String),
    /// The computation itself failed partway through.
    Runtime(String),
}

#[derive(Parser)]
#[command(
    name = "scorelab",
    version,
    about = "Numerical laboratory for exact Gaussian-mixture denoisers"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check the closed-form optimal denoiser against a Bayes-integral oracle.
    TheoremCheck(RunArgs),
    /// Fit how fast the clean-score shortcut converges as noise vanishes.
    LimitSweep(RunArgs),
    /// Rebuild the noisy density from line integrals of the denoiser.
    Reconstruct(RunArgs),
    /// Reconstruct, then strip the noise by spectral deconvolution.
    Deconvolve(RunArgs),
    /// Try to beat the exact denoiser with random smooth perturbations.
    MseProbe(RunArgs),
    /// Compare contour integrals to certify the denoiser is a gradient map.
    PathCheck(RunArgs),
}

fn dispatch(cli: &Cli) -> Result<bool, CliError> {
    let (args, run): (&RunArgs, fn(config::Loaded) -> Result<bool, CliError>) =
        match &cli.command {
            Command::TheoremCheck(a) => (a, commands::theorem_check),
            Command::LimitSweep(a) => (a, commands::limit_sweep),
            Command::Reconstruct(a) => (a, commands::reconstruct),
            Command::Deconvolve(a) => (a, commands::deconvolve),
            Command::MseProbe(a) => (a, commands::mse_probe),
            Command::PathCheck(a) => (a, commands::path_check),
        };
    run(config::load(args)?)
}

fn main() {
    let cli = Cli::parse();
    let code = match dispatch(&cli) {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(CliError::Config(msg)) => {
            eprintln!("configuration error: {msg}");
            2
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("runtime error: {msg}");
            3
        }
    };
    std::process::exit(code);
}
