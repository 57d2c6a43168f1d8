//! Command-line and TOML configuration. A flag beats the file, the file
//! beats the built-in default.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use dde_spectra::model::ReducedParams;
use dde_spectra::ModelParams;
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Parser)]
#[command(name = "dde-spectra", version, about = "Characteristic roots of two-lag linear delay differential equations")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// TOML file with default values for any option below.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,

    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Branch roots from the series, optionally Newton-refined.
    Roots {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        branches: BranchArgs,
        #[command(flatten)]
        series: SeriesArgs,
        /// Refine every series root with damped Newton.
        #[arg(long)]
        refine: bool,
    },
    /// Principal-root scan of the linearized blowfly model over tau2.
    Scan(ScanArgs),
    /// log10 |1 / characteristic function| on a rectangular grid.
    Grid {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        grid: GridArgs,
    },
    /// Branch quantities and assumption diagnostics.
    Check {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        branches: BranchArgs,
    },
    /// Method-of-steps trajectory, optionally with a modal reconstruction.
    Simulate {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        sim: SimArgs,
        #[command(flatten)]
        branches: BranchArgs,
        #[command(flatten)]
        series: SeriesArgs,
    },
    /// Lambert W roots of s = alpha + beta e^{-s tau}.
    SingleLag {
        #[arg(long, allow_hyphen_values = true)]
        alpha: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        beta: Option<f64>,
        #[arg(long)]
        tau: Option<f64>,
        #[command(flatten)]
        branches: BranchArgs,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Lsq,
    Collocation,
    Residue,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub alpha: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub beta: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub tau1: Option<f64>,
    #[arg(long)]
    pub tau2: Option<f64>,
    /// Read (alpha1, beta2, gamma2, tau) instead; the model then has tau1 = 1.
    #[arg(long)]
    pub params_reduced: bool,
    #[arg(long, allow_hyphen_values = true)]
    pub alpha1: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub beta2: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub gamma2: Option<f64>,
    #[arg(long)]
    pub tau: Option<f64>,
}

#[derive(Debug, Args)]
pub struct BranchArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub jmin: Option<i64>,
    #[arg(long, allow_hyphen_values = true)]
    pub jmax: Option<i64>,
}

#[derive(Debug, Args)]
pub struct SeriesArgs {
    #[arg(long)]
    pub mmax: Option<usize>,
    #[arg(long)]
    pub kmax: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ScanArgs {
    #[arg(long)]
    pub r: Option<f64>,
    #[arg(long)]
    pub a1: Option<f64>,
    #[arg(long)]
    pub a2: Option<f64>,
    #[arg(long)]
    pub tau1: Option<f64>,
    #[arg(long)]
    pub tau2_min: Option<f64>,
    #[arg(long)]
    pub tau2_max: Option<f64>,
    #[arg(long)]
    pub grid_n: Option<usize>,
    #[command(flatten)]
    pub series: SeriesArgs,
}

#[derive(Debug, Args)]
pub struct GridArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub re_min: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub re_max: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub im_min: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub im_max: Option<f64>,
    /// Nodes per axis.
    #[arg(long)]
    pub resolution: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SimArgs {
    /// `const:<v>`
    #[arg(long)]
    pub history: Option<String>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long = "T")]
    pub t_end: Option<f64>,
    /// Also fit modal coefficients to the history and emit the reconstruction.
    #[arg(long)]
    pub fit: bool,
    #[arg(long, value_enum)]
    pub method: Option<Method>,
    /// History samples for the least-squares fit (default 4 x roots + 1).
    #[arg(long)]
    pub samples: Option<usize>,
    /// Emit every n-th step.
    #[arg(long)]
    pub stride: Option<usize>,
}

/// Keys accepted in a `--config` file.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub format: Option<Format>,
    pub out: Option<PathBuf>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub gamma: Option<f64>,
    pub tau1: Option<f64>,
    pub tau2: Option<f64>,
    pub params_reduced: Option<bool>,
    pub alpha1: Option<f64>,
    pub beta2: Option<f64>,
    pub gamma2: Option<f64>,
    pub tau: Option<f64>,
    pub jmin: Option<i64>,
    pub jmax: Option<i64>,
    pub mmax: Option<usize>,
    pub kmax: Option<usize>,
    pub refine: Option<bool>,
    pub r: Option<f64>,
    pub a1: Option<f64>,
    pub a2: Option<f64>,
    pub tau2_min: Option<f64>,
    pub tau2_max: Option<f64>,
    pub grid_n: Option<usize>,
    pub re_min: Option<f64>,
    pub re_max: Option<f64>,
    pub im_min: Option<f64>,
    pub im_max: Option<f64>,
    pub resolution: Option<usize>,
    pub history: Option<String>,
    pub dt: Option<f64>,
    #[serde(rename = "T")]
    pub t_end: Option<f64>,
    pub fit: Option<bool>,
    pub method: Option<Method>,
    pub samples: Option<usize>,
    pub stride: Option<usize>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::input("config", format!("cannot read {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::input("config", format!("{}: {}", path.display(), e.message())))
    }
}

pub const DEFAULT_JMIN: i64 = -10;
pub const DEFAULT_JMAX: i64 = 10;
pub const DEFAULT_MMAX: usize = 8;
pub const DEFAULT_KMAX: usize = 1000;

fn required<T>(v: Option<T>, name: &str) -> Result<T, CliError> {
    v.ok_or_else(|| CliError::input("missing", format!("--{name} is required (flag or config key)")))
}

/// Resolves the model from flags and file.
pub fn model(a: &ModelArgs, f: &FileConfig) -> Result<ModelParams, CliError> {
    let reduced = a.params_reduced || f.params_reduced.unwrap_or(false);
    if reduced {
        let alpha1 = a.alpha1.or(f.alpha1).unwrap_or(0.0);
        let beta2 = required(a.beta2.or(f.beta2), "beta2")?;
        let gamma2 = required(a.gamma2.or(f.gamma2), "gamma2")?;
        let tau = required(a.tau.or(f.tau), "tau")?;
        return Ok(ReducedParams::from_reduced(alpha1, beta2, gamma2, tau)?.to_model());
    }
    let alpha = a.alpha.or(f.alpha).unwrap_or(0.0);
    let beta = required(a.beta.or(f.beta), "beta")?;
    let gamma = required(a.gamma.or(f.gamma), "gamma")?;
    let tau1 = a.tau1.or(f.tau1).unwrap_or(1.0);
    let tau2 = required(a.tau2.or(f.tau2), "tau2")?;
    Ok(ModelParams::new(alpha, beta, gamma, tau1, tau2)?)
}

pub fn branch_range(a: &BranchArgs, f: &FileConfig) -> Result<(i64, i64), CliError> {
    let lo = a.jmin.or(f.jmin).unwrap_or(DEFAULT_JMIN);
    let hi = a.jmax.or(f.jmax).unwrap_or(DEFAULT_JMAX);
    if lo > hi {
        return Err(CliError::input("branches", format!("jmin = {lo} exceeds jmax = {hi}")));
    }
    Ok((lo, hi))
}

pub fn truncation(a: &SeriesArgs, f: &FileConfig) -> Result<dde_spectra::Truncation, CliError> {
    Ok(dde_spectra::Truncation::new(
        a.mmax.or(f.mmax).unwrap_or(DEFAULT_MMAX),
        a.kmax.or(f.kmax).unwrap_or(DEFAULT_KMAX),
    )?)
}
