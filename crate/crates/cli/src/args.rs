use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "amrace", version, about = "Friction-safe race-driving policies trained with TD3 and action mapping")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample the admissible-input boundary table for a vehicle.
    BuildTable(BuildTableArgs),
    /// Train a policy on a track.
    Train(TrainArgs),
    /// Evaluate a checkpoint with noise-free episodes from the finish line.
    Evaluate(EvaluateArgs),
    /// Run one deterministic episode and write its trajectory.
    Rollout(RolloutArgs),
    /// Write the interpolated boundary at one speed for a range of steering angles.
    ExportBoundarySlice(SliceArgs),
}

/// Flags shared by every subcommand. Unset flags fall back to the `--config` file and
/// then to built-in defaults.
#[derive(Debug, Clone, Default, Args)]
pub struct Common {
    /// Key-value file with defaults for these flags.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Vehicle parameter file.
    #[arg(long, value_name = "FILE")]
    pub vehicle: Option<PathBuf>,
    /// Track CSV file or built-in track name (oval-short, track-a).
    #[arg(long, value_name = "FILE|NAME")]
    pub track: Option<String>,
    /// Boundary table file.
    #[arg(long, value_name = "FILE")]
    pub table: Option<PathBuf>,
    #[arg(long, value_name = "U64")]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Constraint handling: am, penalty or none.
    #[arg(long, value_name = "MODE")]
    pub mode: Option<String>,
    /// Tire-road friction coefficient override.
    #[arg(long, value_name = "F64")]
    pub mu_max: Option<f64>,
    /// Table grid as `Nv,Nd,Nt`.
    #[arg(long, value_name = "NV,ND,NT")]
    pub grid: Option<String>,
    /// Training iteration budget.
    #[arg(long, value_name = "U64")]
    pub iters: Option<u64>,
}

#[derive(Debug, Args)]
pub struct BuildTableArgs {
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub common: Common,
    /// Steps between evaluations (0 disables them).
    #[arg(long)]
    pub eval_interval: Option<u64>,
    #[arg(long)]
    pub eval_episodes: Option<usize>,
    /// Steps between checkpoints (0 keeps only the final one).
    #[arg(long)]
    pub checkpoint_interval: Option<u64>,
    /// Stop after this many friction-violation steps.
    #[arg(long)]
    pub stop_after_violations: Option<u64>,
    /// Use plain interpolation instead of the conservative boundary lookup.
    #[arg(long)]
    pub plain_lookup: bool,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, value_name = "FILE")]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub episodes: Option<usize>,
    #[arg(long)]
    pub plain_lookup: bool,
}

#[derive(Debug, Args)]
pub struct RolloutArgs {
    #[command(flatten)]
    pub common: Common,
    /// Policy checkpoint; without it the action given by `--hold` is applied.
    #[arg(long, value_name = "FILE")]
    pub checkpoint: Option<PathBuf>,
    /// Constant virtual action `ux,uy`.
    #[arg(long, value_name = "UX,UY", allow_hyphen_values = true)]
    pub hold: Option<String>,
    /// Start speed (m/s).
    #[arg(long, default_value_t = 0.0)]
    pub speed: f64,
    /// Start station along the centerline (m); defaults to the finish line.
    #[arg(long)]
    pub start_s: Option<f64>,
    /// Episode step budget.
    #[arg(long)]
    pub max_steps: Option<usize>,
    #[arg(long)]
    pub plain_lookup: bool,
}

#[derive(Debug, Args)]
pub struct SliceArgs {
    #[command(flatten)]
    pub common: Common,
    /// Speed of the slice (m/s).
    #[arg(long)]
    pub speed: f64,
    /// First steering angle (deg).
    #[arg(long, allow_hyphen_values = true)]
    pub delta_from: f64,
    /// Last steering angle (deg).
    #[arg(long, allow_hyphen_values = true)]
    pub delta_to: f64,
    /// Number of steering angles, evenly spaced.
    #[arg(long, default_value_t = 8)]
    pub delta_steps: usize,
}
