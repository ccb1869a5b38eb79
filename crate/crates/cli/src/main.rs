use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod config;
mod extract;

/// Multi-instance attention genre classifier.
#[derive(Debug, Parser)]
#[command(name = "matt", version)]
pub struct Cli {
    /// TOML run configuration; flags override its keys.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Decode WAV segments and write mel-spectrograms and summary feature caches.
    ExtractFeatures(ExtractArgs),
    /// Group metadata rows into artist/album bags.
    BuildBags(BuildBagsArgs),
    /// Write a seeded synthetic long-tail dataset with its Bayes oracle.
    GenSynth(GenSynthArgs),
    /// Train a classifier on the training bags.
    Train(TrainArgs),
    /// Score a checkpoint on the test split and write reports.
    Evaluate(EvaluateArgs),
    /// Print per-bag or per-segment predictions with attention weights.
    Predict(PredictArgs),
    /// Compare analytic and finite-difference gradients on random bags.
    GradCheck(GradCheckArgs),
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    /// Directory of `<track_id>.wav` files.
    #[arg(long, value_name = "DIR")]
    pub audio_dir: Option<PathBuf>,
    /// Restrict extraction to the tracks listed in this metadata file.
    #[arg(long, value_name = "PATH")]
    pub metadata: Option<PathBuf>,
    /// Output directory for per-track files and feature caches.
    #[arg(long, value_name = "DIR")]
    pub feature_dir: Option<PathBuf>,
    /// Worker threads; 0 uses every logical core.
    #[arg(long, value_name = "N")]
    pub workers: Option<usize>,
    /// Expected sample rate in Hz.
    #[arg(long, value_name = "HZ")]
    pub sample_rate: Option<u32>,
    /// FFT size.
    #[arg(long, value_name = "N")]
    pub n_fft: Option<usize>,
    /// STFT hop in samples.
    #[arg(long, value_name = "N")]
    pub hop: Option<usize>,
    /// Mel bands.
    #[arg(long, value_name = "N")]
    pub n_mels: Option<usize>,
    /// Mel-spectrogram frames after centered crop or pad.
    #[arg(long, value_name = "N")]
    pub mel_frames: Option<usize>,
    /// Recompute tracks whose outputs already exist.
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Args)]
pub struct BuildBagsArgs {
    /// Metadata file (`track_id,album_id,artist_id,genre,split`).
    #[arg(long, value_name = "PATH")]
    pub metadata: Option<PathBuf>,
    /// Bag labelling policy: strict or majority.
    #[arg(long, value_name = "POLICY")]
    pub label_policy: Option<String>,
    /// Output file; standard output when omitted.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GenSynthArgs {
    /// Output directory (metadata.csv, synth.csv, oracle.csv).
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Random seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of genres.
    #[arg(long, value_name = "N")]
    pub genres: Option<usize>,
    /// Zipf exponent of the training bag counts.
    #[arg(long, value_name = "Z")]
    pub zipf: Option<f64>,
    /// Training bags of the most frequent genre.
    #[arg(long, value_name = "N")]
    pub head_count: Option<usize>,
    /// Smallest bag size.
    #[arg(long, value_name = "N")]
    pub bag_size_min: Option<usize>,
    /// Largest bag size.
    #[arg(long, value_name = "N")]
    pub bag_size_max: Option<usize>,
    /// Feature dimension.
    #[arg(long, value_name = "N")]
    pub dim: Option<usize>,
    /// Distance between genre centroids (at most 1.4142).
    #[arg(long, value_name = "D")]
    pub separation: Option<f64>,
    /// Probability that a segment is background noise.
    #[arg(long, value_name = "P")]
    pub noise_rate: Option<f64>,
    /// Validation bags per genre.
    #[arg(long, value_name = "N")]
    pub val_bags: Option<usize>,
    /// Test bags per genre.
    #[arg(long, value_name = "N")]
    pub test_bags: Option<usize>,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Metadata file.
    #[arg(long, value_name = "PATH")]
    pub metadata: Option<PathBuf>,
    /// Directory holding `<feature_set>.csv`.
    #[arg(long, value_name = "DIR")]
    pub feature_dir: Option<PathBuf>,
    /// Feature set name (for example 1to9, 3+6, mfcc or synth).
    #[arg(long, value_name = "NAME")]
    pub feature_set: Option<String>,
    /// Bag labelling policy: strict or majority.
    #[arg(long, value_name = "POLICY")]
    pub label_policy: Option<String>,
    /// Checkpoint directory.
    #[arg(long, value_name = "DIR")]
    pub checkpoint_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Bag aggregator: mean or matt.
    #[arg(long, value_name = "KIND")]
    pub aggregator: Option<String>,
    /// Hidden layer widths, comma separated; empty for a linear encoder.
    #[arg(long, value_name = "LIST")]
    pub hidden: Option<String>,
    /// Segment embedding width.
    #[arg(long, value_name = "N")]
    pub embedding_dim: Option<usize>,
    /// Maximum epochs.
    #[arg(long, value_name = "N")]
    pub epochs: Option<usize>,
    /// Bags per optimizer step.
    #[arg(long, value_name = "N")]
    pub batch_size: Option<usize>,
    /// Optimizer: adam or sgd.
    #[arg(long, value_name = "NAME")]
    pub optimizer: Option<String>,
    /// Learning rate.
    #[arg(long, value_name = "LR")]
    pub learning_rate: Option<f64>,
    /// Epochs without validation improvement before stopping; 0 disables.
    #[arg(long, value_name = "N")]
    pub patience: Option<usize>,
    /// Weight each bag's loss by inverse genre frequency.
    #[arg(long)]
    pub class_reweighting: bool,
    /// Train on single-segment bags instead of artist/album bags.
    #[arg(long)]
    pub segment_level: bool,
    /// Random seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Report directory.
    #[arg(long, value_name = "DIR")]
    pub report_dir: Option<PathBuf>,
    /// Evaluation unit: bag or segment.
    #[arg(long, value_name = "MODE")]
    pub mode: Option<String>,
    /// Also score this Bayes oracle file into `<report-dir>/oracle`.
    #[arg(long, value_name = "PATH")]
    pub oracle: Option<PathBuf>,
    /// Long-tail thresholds on training segments, comma separated.
    #[arg(long, value_name = "LIST")]
    pub subsets: Option<String>,
    /// Top@K values, comma separated.
    #[arg(long, value_name = "LIST")]
    pub ks: Option<String>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Prediction unit: bag or segment.
    #[arg(long, value_name = "MODE")]
    pub mode: Option<String>,
    /// Split to predict: train, validation or test.
    #[arg(long, value_name = "SPLIT", default_value = "test")]
    pub split: String,
    /// Output file; standard output when omitted.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GradCheckArgs {
    /// Random seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Input feature dimension.
    #[arg(long, value_name = "N", default_value_t = 8)]
    pub input_dim: usize,
    /// Hidden layer widths, comma separated.
    #[arg(long, value_name = "LIST", default_value = "7")]
    pub hidden: String,
    /// Segment embedding width.
    #[arg(long, value_name = "N", default_value_t = 5)]
    pub embedding_dim: usize,
    /// Number of genres.
    #[arg(long, value_name = "N", default_value_t = 4)]
    pub genres: usize,
    /// Bag sizes to check, comma separated.
    #[arg(long, value_name = "LIST", default_value = "1,2,7")]
    pub bag_sizes: String,
    /// Bag aggregator: mean or matt.
    #[arg(long, value_name = "KIND", default_value = "matt")]
    pub aggregator: String,
    /// Largest accepted relative error.
    #[arg(long, value_name = "TOL", default_value_t = 1e-4)]
    pub tolerance: f64,
}

/// Bad input, configuration or flags (exit code 1).
#[derive(Debug)]
pub struct Invalid(pub String);

impl std::fmt::Display for Invalid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Invalid {}

pub fn invalid(msg: impl Into<String>) -> anyhow::Error {
    Invalid(msg.into()).into()
}

fn exit_code(err: &anyhow::Error) -> u8 {
    use matt_core::dataset::DatasetError;
    use matt_core::dsp::DspError;
    use matt_core::model::ModelError;
    use matt_core::training::TrainError;
    for cause in err.chain() {
        let validation = cause.is::<Invalid>()
            || matches!(cause.downcast_ref(), Some(TrainError::InvalidConfig(_)))
            || matches!(cause.downcast_ref(), Some(ModelError::InvalidConfig(_)))
            || matches!(cause.downcast_ref(), Some(DatasetError::InfeasibleConfig(_)))
            || matches!(
                cause.downcast_ref(),
                Some(DspError::InvalidConfig(_) | DspError::UnknownFeatureSet(_))
            );
        if validation {
            return 1;
        }
    }
    2
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("MATT_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
