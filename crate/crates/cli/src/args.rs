use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::formats::DatasetFormat;

#[derive(Debug, Parser)]
#[command(name = "tsc", version, about = "Coresets for clustering autocorrelated Gaussian-mixture time series")]
pub struct Cli {
    /// Worker threads, 0 for automatic. TSC_THREADS overrides this flag.
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw a synthetic panel and its planted parameters.
    Generate(GenerateArgs),
    /// Build a coreset with the two-stage sampler or a baseline.
    Coreset(CoresetArgs),
    /// Fit the mixture on a dataset, optionally restricted to a coreset.
    Fit(FitArgs),
    /// Evaluate the objective of stored parameters on a dataset.
    Eval(EvalArgs),
    /// Compare all coreset methods on one panel.
    Experiment(ExperimentArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PresetArg {
    Synthetic1,
    Synthetic2,
    Desk,
}

impl PresetArg {
    pub fn preset(self) -> tsc_core::datagen::Preset {
        use tsc_core::datagen::Preset;
        match self {
            Self::Synthetic1 => Preset::Synthetic1,
            Self::Synthetic2 => Preset::Synthetic2,
            Self::Desk => Preset::Desk,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum InitArg {
    Stationary,
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodArg {
    Crgmm,
    Uni,
    Lfkf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct GenerateArgs {
    /// Named shape; overrides --n, --t, --d, --k and --lambda.
    #[arg(long, value_enum)]
    pub preset: Option<PresetArg>,
    /// Number of entities.
    #[arg(long)]
    pub n: Option<usize>,
    /// Periods per entity.
    #[arg(long)]
    pub t: Option<usize>,
    #[arg(long, default_value_t = 2)]
    pub d: usize,
    #[arg(long, default_value_t = 3)]
    pub k: usize,
    #[arg(long, default_value_t = 0.01)]
    pub lambda: f64,
    #[arg(long, value_enum, default_value_t = InitArg::Stationary)]
    pub init: InitArg,
    #[arg(long, value_enum, default_value_t = DatasetFormat::Csv)]
    pub format: DatasetFormat,
    #[arg(long)]
    pub seed: u64,
    /// Output directory.
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SizeArgs {
    /// Entity draws; use together with --l.
    #[arg(long, requires = "l")]
    pub m: Option<usize>,
    /// Time draws per selected entity.
    #[arg(long, requires = "m")]
    pub l: Option<usize>,
    /// Error target for the size formulas, used when --m/--l are absent.
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub c_entity: f64,
    #[arg(long, default_value_t = 1.0)]
    pub c_time: f64,
}

/// Input paths are skipped when serialized; manifests record input hashes.
#[derive(Debug, Clone, Args, Serialize)]
pub struct CoresetArgs {
    #[arg(long)]
    #[serde(skip)]
    pub data: PathBuf,
    #[arg(long, value_enum, default_value_t = MethodArg::Crgmm)]
    pub method: MethodArg,
    #[command(flatten)]
    pub sizes: SizeArgs,
    /// Number of distinct pairs for the baselines.
    #[arg(long)]
    pub gamma: Option<usize>,
    #[arg(long, default_value_t = 3)]
    pub k: usize,
    #[arg(long, default_value_t = 0.01)]
    pub lambda: f64,
    /// Covariance condition bound D.
    #[arg(long, default_value_t = 1.0)]
    pub d_ratio: f64,
    /// k-means restarts for the entity stage.
    #[arg(long, default_value_t = 3)]
    pub restarts: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SolverArgs {
    #[arg(long, default_value_t = 3)]
    pub k: usize,
    #[arg(long, default_value_t = 0.01)]
    pub lambda: f64,
    #[arg(long, default_value_t = 200)]
    pub max_iters: usize,
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    #[arg(long, default_value_t = 3)]
    pub n_init: usize,
    /// Keep covariances at their initial values.
    #[arg(long)]
    pub fix_sigma: bool,
    /// Keep autocorrelations at their initial values.
    #[arg(long)]
    pub fix_ar: bool,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FitArgs {
    #[arg(long)]
    #[serde(skip)]
    pub data: PathBuf,
    #[arg(long)]
    #[serde(skip)]
    pub coreset: Option<PathBuf>,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EvalArgs {
    #[arg(long)]
    #[serde(skip)]
    pub data: PathBuf,
    #[arg(long)]
    #[serde(skip)]
    pub params: PathBuf,
    /// Reference parameters, usually the full-data fit; adds the likelihood ratio.
    #[arg(long)]
    #[serde(skip)]
    pub reference: Option<PathBuf>,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ExperimentArgs {
    /// Generated panel shape, used when --data is absent.
    #[arg(long, value_enum, default_value_t = PresetArg::Desk)]
    pub preset: PresetArg,
    /// Existing dataset instead of a generated one.
    #[arg(long)]
    #[serde(skip)]
    pub data: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "0.1")]
    pub epsilons: Vec<f64>,
    #[arg(long, default_value_t = 5)]
    pub reps: usize,
    #[command(flatten)]
    pub sizes: SizeArgs,
    /// Covariance condition bound D; defaults to the planted value for
    /// generated panels and 1 otherwise.
    #[arg(long)]
    pub d_ratio: Option<f64>,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Fit every method on the full data to check the harness.
    #[arg(long)]
    pub identity: bool,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
}
