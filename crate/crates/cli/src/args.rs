use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "pcrp", version, about = "Powered Chinese restaurant process clustering")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw a labelled dataset from a preset or a mixture file.
    Simulate(SimulateArgs),
    /// Choose the power r by cross-validation.
    Tune(TuneArgs),
    /// Run one Gibbs chain and write its trace, samples and summary.
    Fit(FitArgs),
    /// Score retained samples against true labels.
    Eval(EvalArgs),
    /// Run several methods on one dataset and tabulate them.
    Compare(CompareArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Preset name: sim1, sim2 or oldfaithful.
    #[arg(long, conflicts_with = "spec_file", required_unless_present = "spec_file")]
    pub preset: Option<String>,
    /// JSON mixture with `weights`, `means` and `covariances`.
    #[arg(long)]
    pub spec_file: Option<PathBuf>,
    #[arg(long, default_value_t = 300)]
    pub n: usize,
    #[arg(long)]
    pub seed: u64,
    /// Output CSV path.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    /// Input CSV (x1..xd, optional label).
    #[arg(long, conflicts_with = "preset")]
    pub data: Option<PathBuf>,
    /// Preset to generate instead of reading a file.
    #[arg(long)]
    pub preset: Option<String>,
    /// Rows to generate for mixture presets.
    #[arg(long)]
    pub n: Option<usize>,
    /// Z-score every column before fitting.
    #[arg(long)]
    pub standardize: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProcessArg {
    Crp,
    Pcrp,
    Gcrp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GForm {
    /// g(x) = x^r, r from --power
    Power,
    /// g(x) = x ln(e + x)
    Xlog,
}

#[derive(Debug, Clone, Args)]
pub struct ProcessArgs {
    #[arg(long, value_enum, default_value_t = ProcessArg::Crp)]
    pub process: ProcessArg,
    /// Concentration α.
    #[arg(long, conflicts_with = "true_k")]
    pub alpha: Option<f64>,
    /// Power r for pcrp (and gcrp with --g-form power).
    #[arg(long)]
    pub power: Option<f64>,
    /// Size function for gcrp.
    #[arg(long, value_enum, default_value_t = GForm::Xlog)]
    pub g_form: GForm,
    /// Set α = true_k / ln N (the CRP-Oracle calibration).
    #[arg(long)]
    pub true_k: Option<usize>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct PriorArgs {
    #[arg(long)]
    pub kappa0: Option<f64>,
    #[arg(long)]
    pub nu0: Option<f64>,
    /// Ψ₀ = psi0_scale × empirical covariance.
    #[arg(long)]
    pub psi0_scale: Option<f64>,
    /// Comma-separated prior mean; defaults to the data mean.
    #[arg(long, value_delimiter = ',')]
    pub mu0: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct SamplerArgs {
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub burn_in: Option<usize>,
    #[arg(long)]
    pub thin: Option<usize>,
    /// Start from this many round-robin clusters instead of one; a value of
    /// N or more starts every item in its own cluster.
    #[arg(long)]
    pub initial_k: Option<usize>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct GridArgs {
    #[arg(long)]
    pub grid_start: Option<f64>,
    #[arg(long)]
    pub grid_step: Option<f64>,
    #[arg(long)]
    pub grid_max: Option<f64>,
    #[arg(long)]
    pub jump_factor: Option<f64>,
    /// Grid points evaluated concurrently.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Starting clusters for the cross-validation chains (default: one).
    #[arg(long)]
    pub tune_initial_k: Option<usize>,
}

#[derive(Debug, Args)]
pub struct TuneArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Tune on a seeded subset of this many rows.
    #[arg(long)]
    pub train_size: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[command(flatten)]
    pub prior: PriorArgs,
    #[command(flatten)]
    pub sampler: SamplerArgs,
    #[command(flatten)]
    pub grid: GridArgs,
    #[arg(long)]
    pub seed: u64,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub process: ProcessArgs,
    #[command(flatten)]
    pub prior: PriorArgs,
    #[command(flatten)]
    pub sampler: SamplerArgs,
    #[arg(long)]
    pub seed: u64,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// samples.csv written by `fit`.
    #[arg(long)]
    pub samples: PathBuf,
    /// CSV whose label column holds the true clustering.
    #[arg(long)]
    pub truth: PathBuf,
    /// Row name in the summary table.
    #[arg(long, default_value = "fit")]
    pub method: String,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// JSON run configuration; flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub data: DataArgs,
    /// Comma-separated subset of crp, crp-oracle, pcrp.
    #[arg(long, value_delimiter = ',')]
    pub methods: Option<Vec<String>>,
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Fixed pCRP power; tuned by cross-validation when absent.
    #[arg(long)]
    pub power: Option<f64>,
    #[arg(long)]
    pub true_k: Option<usize>,
    /// Split the data: tune on this many rows, evaluate on the rest.
    #[arg(long)]
    pub train_size: Option<usize>,
    /// Size of the separate training draw for mixture presets.
    #[arg(long)]
    pub train_n: Option<usize>,
    #[command(flatten)]
    pub prior: PriorArgs,
    #[command(flatten)]
    pub sampler: SamplerArgs,
    #[command(flatten)]
    pub grid: GridArgs,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}
