//! The `prosoctl` command line.
//!
//! Exit codes: 0 on success, 1 on runtime or validation failure, 2 on usage
//! errors. `PROSOCTL_THREADS` caps the worker pool.

mod commands;
mod manifest;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub use manifest::{default_manifest_path, RunManifest};

#[derive(Debug, Parser)]
#[command(name = "prosoctl", version, about = "Hierarchical prosodic controls: extract, predict, boost")]
pub struct Cli {
    /// Where to write the run manifest (default: next to the primary output).
    #[arg(long, global = true)]
    pub manifest: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic aligned corpus with planted emphasis effects.
    Synth(SynthArgs),
    /// Check a corpus file and report every violation.
    Validate(ValidateArgs),
    /// Compute normalization statistics and phone-level targets.
    Extract(ExtractArgs),
    /// Train a predictor.
    Train(TrainArgs),
    /// Train a grid of predictor structures and keep the best on held-out data.
    GridSearch(GridSearchArgs),
    /// Predict phone-level controls with a trained model.
    Predict(PredictArgs),
    /// Predict, rectify, boost focal words and realize physical prosody.
    Boost(BoostArgs),
    /// Plot control trajectories as SVG.
    Plot(PlotArgs),
    /// Evaluate the multitask spectral loss on five CSV matrices.
    LossEval(LossEvalArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Number of utterances.
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// JSON file with generator settings; flags below override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub emphasis_rate: Option<f64>,
    #[arg(long)]
    pub noise: Option<f64>,
    #[arg(long)]
    pub dur_effect: Option<f64>,
    #[arg(long)]
    pub spread_effect: Option<f64>,
    #[arg(long)]
    pub speakers: Option<usize>,
    #[arg(long)]
    pub tempo_step: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(long)]
    pub corpus: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ScaleArg {
    Variance,
    Stddev,
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub stats_out: PathBuf,
    #[arg(long)]
    pub targets_out: PathBuf,
    /// Reuse existing statistics instead of computing them from `--corpus`.
    #[arg(long)]
    pub stats: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = ScaleArg::Variance)]
    pub scale: ScaleArg,
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    /// Named configuration to start from.
    #[arg(long, default_value = "desk-hybrid")]
    pub preset: String,
    /// JSON predictor configuration; replaces the preset.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub blocks: Option<usize>,
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long)]
    pub dropout: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Emphasis embedding width; 0 disables the emphasis input.
    #[arg(long)]
    pub emphasis_dim: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    /// Training corpus.
    #[arg(long)]
    pub train: PathBuf,
    /// Held-out corpus; when absent a fraction of `--train` is held out.
    #[arg(long)]
    pub dev: Option<PathBuf>,
    #[arg(long, default_value_t = 0.1)]
    pub heldout: f64,
    #[arg(long, default_value_t = 0)]
    pub split_seed: u64,
    /// Normalization statistics; computed from the training side when absent.
    #[arg(long)]
    pub stats: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = ScaleArg::Variance)]
    pub scale: ScaleArg,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Model file to write.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct GridSearchArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    /// JSON array of predictor configurations; default is the structure grid
    /// around the base configuration.
    #[arg(long)]
    pub grid: Option<PathBuf>,
    /// Best model file to write.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub corpus: PathBuf,
    /// Adds realized duration and spread columns.
    #[arg(long)]
    pub stats: Option<PathBuf>,
    /// Mean-pool predictions over sentences and words.
    #[arg(long)]
    pub rectify: bool,
    /// Only this utterance.
    #[arg(long)]
    pub utt: Option<String>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BoostArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub stats: PathBuf,
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub utt: Option<String>,
    /// Comma-separated word indices, or a word token to match.
    #[arg(long)]
    pub focus: Option<String>,
    /// Boost preset: pc-unsup, hybrid or baseline-sent.
    #[arg(long)]
    pub preset: Option<String>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
    /// Plot unboosted against boosted controls of the first utterance.
    #[arg(long)]
    pub svg: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    /// Targets or predictions CSV.
    #[arg(long)]
    pub input: PathBuf,
    /// Second CSV drawn over the first.
    #[arg(long)]
    pub overlay: Option<PathBuf>,
    #[arg(long)]
    pub utt: Option<String>,
    #[arg(long)]
    pub out: PathBuf,
    /// CSV echo of the plotted series (default: `<out stem>.series.csv`).
    #[arg(long)]
    pub series_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct LossEvalArgs {
    #[arg(long)]
    pub mel_pred: PathBuf,
    #[arg(long)]
    pub mel_target: PathBuf,
    #[arg(long)]
    pub lpc_pre: PathBuf,
    #[arg(long)]
    pub lpc_post: PathBuf,
    #[arg(long)]
    pub lpc_target: PathBuf,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Runtime(#[from] crate::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Caps the global worker pool when `PROSOCTL_THREADS` is set.
pub fn configure_threads() -> CliResult<()> {
    let Ok(raw) = std::env::var("PROSOCTL_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .map_err(|_| CliError::Usage(format!("PROSOCTL_THREADS={raw:?} is not a thread count")))?;
    // a pool that already exists (tests, embedding) keeps its size
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

pub fn run(cli: Cli) -> CliResult<()> {
    configure_threads()?;
    let manifest = cli.manifest.as_deref();
    match cli.command {
        Command::Synth(a) => commands::synth(a, manifest),
        Command::Validate(a) => commands::validate(a, manifest),
        Command::Extract(a) => commands::extract(a, manifest),
        Command::Train(a) => commands::train(a, manifest),
        Command::GridSearch(a) => commands::grid_search(a, manifest),
        Command::Predict(a) => commands::predict(a, manifest),
        Command::Boost(a) => commands::boost(a, manifest),
        Command::Plot(a) => commands::plot(a, manifest),
        Command::LossEval(a) => commands::loss_eval(a, manifest),
    }
}

/// Parses `args` and runs; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
