mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

/// Failure classes, each with its own exit status.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags, config file or hyperparameters (exit 2).
    Config(String),
    /// Missing, unreadable, malformed or mismatched files (exit 3).
    Io(String),
    /// Training diverged (exit 4).
    Numerical(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io(_) => 3,
            CliError::Numerical(_) => 4,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Io(m) => write!(f, "input/output error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical instability: {m}"),
        }
    }
}

impl From<spikecoder::Error> for CliError {
    fn from(e: spikecoder::Error) -> Self {
        use spikecoder::Error as E;
        match e {
            E::Config(_) | E::InputDomain(_) => CliError::Config(e.to_string()),
            E::Numerical { .. } => CliError::Numerical(e.to_string()),
            E::Io { .. } | E::Format { .. } | E::Consistency(_) | E::Shape(_) => {
                CliError::Io(e.to_string())
            }
        }
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "spikecoder",
    version,
    about = "Spiking autoencoders and audio-to-image synthesis"
)]
pub struct Cli {
    /// Flat `key = value` file; flags given on the command line take precedence.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Seed for every random stream.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (default `runs`).
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

/// Training hyperparameters shared by the training commands. Unset values
/// fall back to the config file, then to the command's defaults.
#[derive(Args, Debug, Default, Clone)]
pub struct HyperArgs {
    /// Leak coefficient; `train-ae` accepts a comma list and trains one model
    /// per value.
    #[arg(long)]
    alpha: Option<String>,
    #[arg(long)]
    v_th: Option<f32>,
    /// Input spike train duration.
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    lr: Option<f32>,
    #[arg(long)]
    weight_decay: Option<f32>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    max_rate: Option<f32>,
    /// `on` or `off`.
    #[arg(long)]
    mask: Option<String>,
}

#[derive(Args, Debug, Default, Clone)]
pub struct SyntheticArgs {
    /// Synthetic training spectrograms per class.
    #[arg(long)]
    train_per_class: Option<usize>,
    /// Synthetic test spectrograms per class.
    #[arg(long)]
    test_per_class: Option<usize>,
    #[arg(long)]
    channels: Option<usize>,
    #[arg(long)]
    frames: Option<usize>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Train a 784-H-784 autoencoder; writes a checkpoint, a per-batch loss
    /// CSV and a reconstruction contact sheet.
    TrainAe {
        /// Directory holding the IDX files.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        hidden: Option<usize>,
        /// Train on the first N images only.
        #[arg(long)]
        limit: Option<usize>,
        #[command(flatten)]
        hyper: HyperArgs,
    },
    /// Score a checkpoint on the train and test splits.
    Eval {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        data: Option<PathBuf>,
        /// Inference duration (default: the training duration).
        #[arg(long)]
        steps: Option<usize>,
        /// Evaluate the first N images of each split.
        #[arg(long)]
        limit: Option<usize>,
        /// `train`, `test` or `both`.
        #[arg(long)]
        split: Option<String>,
    },
    /// Train an audiocoder against an autoencoder's hidden states.
    TrainAudio {
        /// Autoencoder checkpoint whose encoder makes targets and whose
        /// decoder renders images.
        #[arg(long)]
        ae: Option<PathBuf>,
        /// Directory of the IDX images paired with the audio.
        #[arg(long)]
        images: Option<PathBuf>,
        /// `SPC1` training spectrograms (labels from `<file>.labels`);
        /// synthetic audio is generated when omitted.
        #[arg(long)]
        audio_train: Option<PathBuf>,
        #[arg(long)]
        audio_test: Option<PathBuf>,
        /// Pairing mode, `A` or `B`.
        #[arg(long)]
        mode: Option<String>,
        /// Stored hidden-state duration; a comma list runs one audiocoder
        /// per value.
        #[arg(long)]
        hidden_steps: Option<String>,
        #[arg(long)]
        hidden: Option<usize>,
        #[command(flatten)]
        synthetic: SyntheticArgs,
        #[command(flatten)]
        hyper: HyperArgs,
    },
    /// Render images from audio through an audiocoder and a decoder.
    Synthesize {
        #[arg(long)]
        ae: Option<PathBuf>,
        #[arg(long)]
        audiocoder: Option<PathBuf>,
        /// `SPC1` file to synthesize from; default is the synthetic test split.
        #[arg(long)]
        audio: Option<PathBuf>,
        /// Only synthesize synthetic test samples of this class.
        #[arg(long)]
        class: Option<u8>,
        /// Number of samples to render.
        #[arg(long)]
        count: Option<usize>,
        #[command(flatten)]
        synthetic: SyntheticArgs,
    },
    /// Train one autoencoder per value of a hyperparameter and tabulate test
    /// scores.
    Sweep {
        /// `alpha`, `hidden`, `steps`, `lr` or `mask`.
        #[arg(long)]
        param: Option<String>,
        /// Comma-separated values.
        #[arg(long)]
        values: Option<String>,
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        hidden: Option<usize>,
        #[arg(long)]
        limit: Option<usize>,
        /// Evaluate on the first N test images.
        #[arg(long)]
        test_limit: Option<usize>,
        #[command(flatten)]
        hyper: HyperArgs,
    },
    /// Write a synthetic spectrogram set as an `SPC1` file plus labels.
    GenSpectrograms {
        #[arg(long)]
        classes: Option<usize>,
        #[arg(long)]
        per_class: Option<usize>,
        #[arg(long)]
        channels: Option<usize>,
        #[arg(long)]
        frames: Option<usize>,
        /// Output file (default `<out>/spectrograms.spc1`).
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("spikecoder: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
