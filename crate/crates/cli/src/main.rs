//! `vologan`: dataset synthesis, training, translation, evaluation and
//! verification from one binary.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 I/O error,
//! 3 numerical failure (non-finite values or a failed gradient check).

mod commands;
mod eval;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use vologan_core::Error;

#[derive(Parser)]
#[command(name = "vologan", version, about = "RGB-D CycleGAN domain adaptation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a procedural synthetic/target dataset pair.
    DatasetSynth(SynthArgs),
    /// Train from a JSON config.
    Train(TrainArgs),
    /// Translate a dataset through one generator of a checkpoint.
    Translate(TranslateArgs),
    /// Evaluation tools.
    #[command(subcommand)]
    Eval(EvalCommand),
    /// Finite-difference checks of every registered layer and loss.
    Gradcheck(GradcheckArgs),
    /// Parameter counts and layer table of a config.
    Inspect(InspectArgs),
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    /// Samples per domain.
    #[arg(long)]
    n: usize,
    /// `S` for S×S or `HxW`.
    #[arg(long, default_value = "64")]
    size: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Generator depth the size must suit; defaults to the toy generator's.
    #[arg(long)]
    levels: Option<usize>,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    config: PathBuf,
    /// Continue from the newest checkpoint in the run directory.
    #[arg(long)]
    resume: bool,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    run_dir: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Direction {
    /// Synthetic to target.
    St,
    /// Target to synthetic.
    Ts,
}

#[derive(Args)]
struct TranslateArgs {
    /// Checkpoint directory, or a run directory (newest checkpoint).
    #[arg(long)]
    checkpoint: PathBuf,
    /// Manifest of the source dataset.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "st")]
    direction: Direction,
    #[arg(long, default_value_t = 8)]
    batch_size: usize,
}

#[derive(Subcommand)]
enum EvalCommand {
    /// PCA of real target samples against translated synthetic samples.
    Pca(PcaArgs),
    /// Per-channel histogram of one sample.
    Hist(HistArgs),
    /// Colored point cloud of one sample as ASCII PLY.
    Pointcloud(PointcloudArgs),
    /// Layout-branch map of a discriminator for one sample.
    Layout(LayoutArgs),
}

#[derive(Args)]
struct PcaArgs {
    #[arg(long)]
    run_dir: PathBuf,
    /// Evaluate the initial generator.
    #[arg(long)]
    before: bool,
    /// Evaluate the newest checkpoint.
    #[arg(long)]
    after: bool,
    /// Samples per set.
    #[arg(long, default_value_t = 50)]
    n: usize,
    #[arg(long, default_value_t = 5)]
    k: usize,
    /// Output directory; defaults to `<run-dir>/eval`.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// One sample of a manifest, optionally passed through a generator first.
#[derive(Args)]
struct SampleArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long, default_value_t = 0)]
    index: usize,
    /// Translate the sample with this checkpoint (or run directory) first.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "st")]
    direction: Direction,
}

#[derive(Args)]
struct HistArgs {
    #[command(flatten)]
    sample: SampleArgs,
    #[arg(long, default_value_t = 64)]
    bins: usize,
    /// CSV output; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PointcloudArgs {
    #[command(flatten)]
    sample: SampleArgs,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 2)]
    stride: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Judge {
    /// Discriminator of the synthetic domain.
    S,
    /// Discriminator of the target domain.
    T,
}

#[derive(Args)]
struct LayoutArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long, default_value_t = 0)]
    index: usize,
    #[arg(long, value_enum, default_value = "t")]
    discriminator: Judge,
}

#[derive(Args)]
struct GradcheckArgs {
    /// Floating-point width; central differences at eps 1e-4 need 64.
    #[arg(long, default_value_t = 64)]
    bits: u32,
    /// Only cases whose name contains this string.
    #[arg(long)]
    filter: Option<String>,
}

#[derive(Args)]
struct InspectArgs {
    /// Run config; the full-scale defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Omit the per-layer table.
    #[arg(long)]
    summary: bool,
}

/// A failed command with its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn usage(message: impl Into<String>) -> Self {
        Failure {
            code: 1,
            message: message.into(),
        }
    }

    pub fn numerical(message: impl Into<String>) -> Self {
        Failure {
            code: 3,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = if e.is_numerical() {
            3
        } else if e.is_io() {
            2
        } else {
            1
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

pub type CmdResult = Result<(), Failure>;

fn run(cli: Cli) -> CmdResult {
    vologan_core::threads::init_thread_pool()?;
    match cli.command {
        Command::DatasetSynth(a) => commands::dataset_synth(a),
        Command::Train(a) => commands::train(a),
        Command::Translate(a) => commands::translate(a),
        Command::Eval(EvalCommand::Pca(a)) => eval::pca(a),
        Command::Eval(EvalCommand::Hist(a)) => eval::hist(a),
        Command::Eval(EvalCommand::Pointcloud(a)) => eval::pointcloud(a),
        Command::Eval(EvalCommand::Layout(a)) => eval::layout(a),
        Command::Gradcheck(a) => commands::gradcheck(a),
        Command::Inspect(a) => commands::inspect(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code)
        }
    }
}
