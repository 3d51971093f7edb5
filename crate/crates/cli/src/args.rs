use std::path::PathBuf;

use bmi_core::BlockGrid;
use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "bmi", version, about = "Block modulated imaging: encode, decode, evaluate")]
pub struct Cli {
    /// key=value file supplying defaults for the subcommand's flags
    /// (keys are long flag names; command-line flags win).
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a photomask file (BMIK).
    #[command(name = "mask-gen", args_override_self = true)]
    MaskGen(MaskGenArgs),
    /// Encode images into measurements (BMIM).
    #[command(args_override_self = true)]
    Encode(EncodeArgs),
    /// Reconstruct images from measurements.
    #[command(args_override_self = true)]
    Decode(DecodeArgs),
    /// Print PSNR and SSIM of test images against references.
    #[command(args_override_self = true)]
    Metrics(MetricsArgs),
    /// Time the encoder at several resolutions.
    #[command(args_override_self = true)]
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
pub struct MaskGenArgs {
    #[arg(long)]
    pub height: usize,
    #[arg(long)]
    pub width: usize,
    #[arg(long, default_value_t = bmi_core::mask::DEFAULT_DENSITY)]
    pub density: f32,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Write an all-ones (fully transparent) mask instead of a random one.
    #[arg(long, conflicts_with_all = ["density", "seed"])]
    pub ones: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EncodeArgs {
    /// Image file (PGM/PPM or .f32) or a directory of them.
    #[arg(long)]
    pub image: PathBuf,
    /// Mask file (BMIK) matching the image size.
    #[arg(long)]
    pub mask: PathBuf,
    #[arg(long)]
    pub grid: BlockGrid,
    /// Zero-pad bottom/right edges when the grid does not divide the image.
    #[arg(long)]
    pub pad: bool,
    /// Accumulate block sums in 64-bit floats.
    #[arg(long)]
    pub f64_accumulate: bool,
    /// Output file, or directory when --image is a directory.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Args)]
pub struct DecodeArgs {
    /// Measurement file(s), one per channel, or a single directory.
    #[arg(long, required = true, num_args = 1..)]
    pub measurement: Vec<PathBuf>,
    /// Mask file overriding the one recorded in the measurement.
    #[arg(long)]
    pub mask: Option<PathBuf>,
    #[arg(long, default_value = "gap")]
    pub algorithm: String,
    /// `stages10`: ten fixed iterations without early stopping.
    #[arg(long)]
    pub preset: Option<String>,
    #[arg(long)]
    pub iters: Option<usize>,
    /// η per iteration: one value, or a comma-separated schedule.
    #[arg(long)]
    pub eta: Option<String>,
    #[arg(long)]
    pub tv_weight: Option<f32>,
    #[arg(long)]
    pub tv_inner: Option<usize>,
    #[arg(long)]
    pub rho: Option<f32>,
    #[arg(long)]
    pub stop_tol: Option<f64>,
    /// Fail on never-observed positions instead of leaving them to the prior.
    #[arg(long)]
    pub strict_coverage: bool,
    /// Keep values outside [0, 1] (only meaningful for .f32 output).
    #[arg(long)]
    pub no_clamp: bool,
    /// Output image (PGM/PPM or .f32), or directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Write the iteration trace as CSV (single input only).
    #[arg(long)]
    pub trace: Option<PathBuf>,
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    /// Reference image or directory.
    #[arg(long)]
    pub reference: PathBuf,
    /// Test image or directory (paired with references by file name).
    #[arg(long)]
    pub test: PathBuf,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Comma-separated list of HxW (or N for NxN).
    #[arg(long, value_delimiter = ',', default_value = "512,2048,8192")]
    pub resolutions: Vec<String>,
    #[arg(long, default_value = "4x4")]
    pub grid: BlockGrid,
    #[arg(long, default_value_t = 100)]
    pub repeats: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// CSV destination; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}
