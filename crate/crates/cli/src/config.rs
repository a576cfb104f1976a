//! Command-line flags, the JSON config file that mirrors them, and merging
//! the two into a validated run description. Flags win over file values.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use crate::CliError;

#[derive(Parser, Debug)]
#[command(name = "rrtsim", version, about = "RRT / nearest neighbour tree simulations")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Grow a single tree, optionally dumping it or its per-step series.
    Grow(GrowArgs),
    /// Steps until an RRT rooted at the origin reaches x0 >= threshold.
    HitTime(ExperimentArgs),
    /// Steps until an RRT occupies every cell of the cover grid.
    CoverTime(ExperimentArgs),
    /// Edge, length, depth and height statistics of RRTs grown past cover.
    PostCover(ExperimentArgs),
    /// Depth and height of nearest neighbour trees against the depth model.
    NntStats(ExperimentArgs),
    /// Coupon collector draws against n * H_n.
    Coupon(CouponArgs),
    /// Pathwise checks of the RRT step rule, cell agreement and coupling.
    Check(CheckArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GrowKind {
    Rrt,
    Nnt,
}

/// Flags shared by every subcommand.
#[derive(Args, Debug, Default)]
pub struct Common {
    /// JSON file with the same keys as the long flags (dashes as underscores).
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Args, Debug)]
pub struct ExperimentArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long = "d")]
    pub d: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub epsilons: Option<Vec<f64>>,
    #[arg(long)]
    pub trials: Option<u64>,
    /// Step cap; for post-cover and nnt-stats, the final tree size.
    #[arg(long)]
    pub max_steps: Option<u64>,
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Uniform probes per checkpoint for the conditional edge estimate.
    #[arg(long)]
    pub probes: Option<usize>,
    /// Aggregate output; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Per-trial CSV.
    #[arg(long)]
    pub raw: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(Args, Debug)]
pub struct CouponArgs {
    #[command(flatten)]
    pub common: Common,
    /// Number of coupon types.
    #[arg(long)]
    pub n: Option<u64>,
    #[arg(long)]
    pub trials: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub raw: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(Args, Debug)]
pub struct GrowArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, value_enum)]
    pub kind: Option<GrowKind>,
    #[arg(long = "d")]
    pub d: Option<usize>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Steps to grow (after loading, if --load is given).
    #[arg(long)]
    pub steps: Option<u64>,
    /// Write the tree here.
    #[arg(long)]
    pub dump: Option<PathBuf>,
    /// Start from a previously dumped tree.
    #[arg(long)]
    pub load: Option<PathBuf>,
    /// Per-step series CSV.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct CheckArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long = "d")]
    pub d: Option<usize>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub steps: Option<u64>,
    /// Connection nodes grown on the covered tree for the coupling check.
    #[arg(long)]
    pub coupled: Option<u64>,
}

/// Config file contents. Every key mirrors a long flag.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
    pub d: Option<usize>,
    pub epsilons: Option<Vec<f64>>,
    pub epsilon: Option<f64>,
    pub trials: Option<u64>,
    pub max_steps: Option<u64>,
    pub threshold: Option<f64>,
    pub probes: Option<usize>,
    pub out: Option<PathBuf>,
    pub raw: Option<PathBuf>,
    pub format: Option<Format>,
    pub n: Option<u64>,
    pub kind: Option<GrowKind>,
    pub steps: Option<u64>,
    pub dump: Option<PathBuf>,
    pub load: Option<PathBuf>,
    pub coupled: Option<u64>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))
    }

    pub fn for_common(common: &Common) -> Result<Self, CliError> {
        common
            .config
            .as_deref()
            .map(Self::load)
            .transpose()
            .map(Option::unwrap_or_default)
    }
}

/// Flag value if given, else the file value, else an error naming the field.
pub fn required<T>(flag: Option<T>, file: Option<T>, field: &str) -> Result<T, CliError> {
    flag.or(file)
        .ok_or_else(|| CliError::Usage(format!("missing required field `{field}`")))
}
