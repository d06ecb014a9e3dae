use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use jlkit::JlError;

mod commands;

/// Random projection with set-wide distance guarantees, and the k-means
/// consequences.
#[derive(Debug, Parser)]
#[command(name = "jlkit", version)]
struct Cli {
    /// Worker threads; defaults to one per core.
    #[arg(long, global = true, env = "JLKIT_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Target dimensions for m points at failure probability ε and error δ.
    Dim(DimArgs),
    /// Regenerate a published table or figure as CSV.
    Reproduce(ReproduceArgs),
    /// Project a dataset with a seeded Gaussian operator.
    Project(ProjectArgs),
    /// Compare pairwise squared distances before and after projection.
    Verify(VerifyArgs),
    /// Cost sandwich and fixed-point transfer over repeated projections.
    KmeansCompare(KmeansCompareArgs),
    /// Clusterability parameters before and after projection.
    Clusterability(ClusterabilityArgs),
    /// Generate a Gaussian mixture with a controlled gap.
    Gen(GenArgs),
}

#[derive(Debug, Args)]
pub struct DimArgs {
    #[arg(long)]
    pub m: u64,
    #[arg(long)]
    pub epsilon: f64,
    #[arg(long)]
    pub delta: f64,
    /// Original dimension; enables the implicit bound.
    #[arg(long)]
    pub n: Option<u64>,
    /// Add the Dasgupta-Gupta dimension and repetition count.
    #[arg(long)]
    pub dg: bool,
    /// Use the δ²/2 - δ³/3 denominator for the Dasgupta-Gupta dimension.
    #[arg(long, requires = "dg")]
    pub dg_original: bool,
}

#[derive(Debug, Args)]
pub struct ReproduceArgs {
    /// table1..table8, fig-samplesize, fig-epsilon, fig-delta, fig-orign,
    /// fig-distortion, fig-gap, or `all`.
    pub id: String,
    /// Output file; for `all`, a directory. Defaults to stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Seed of the distortion figure.
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Bound {
    /// Explicit when it fits below n, otherwise implicit.
    Auto,
    Explicit,
    Implicit,
}

#[derive(Debug, Args)]
pub struct ProjectArgs {
    #[arg(long, default_value = "data.bin")]
    pub input: PathBuf,
    #[arg(long, default_value = "projected.bin")]
    pub out: PathBuf,
    /// Target dimension; without it the dimension bound picks one.
    #[arg(long, conflicts_with = "auto_dim")]
    pub nprime: Option<usize>,
    /// Pick n' from the dimension bound (the default without --nprime).
    #[arg(long)]
    pub auto_dim: bool,
    /// Which bound picks n'. The implicit bound holds for orthonormal rows
    /// only, so choosing it turns on --orthogonalize.
    #[arg(long, value_enum, default_value_t = Bound::Auto)]
    pub bound: Bound,
    #[arg(long, default_value_t = 0.1)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 0.2)]
    pub delta: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Orthonormalize the rows (not the default construction).
    #[arg(long)]
    pub orthogonalize: bool,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long, default_value = "data.bin")]
    pub original: PathBuf,
    #[arg(long, default_value = "projected.bin")]
    pub projected: PathBuf,
    #[arg(long, default_value_t = 0.2)]
    pub delta: f64,
    /// Write the quotient histogram here.
    #[arg(long)]
    pub histogram: Option<PathBuf>,
    /// Histogram bin width; defaults to δ/20.
    #[arg(long)]
    pub bin_width: Option<f64>,
    /// Also estimate the failure rate over this many fresh projections.
    #[arg(long)]
    pub failure_trials: Option<u64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct KmeansCompareArgs {
    /// Dataset to project repeatedly; without it the generated-mixture
    /// harnesses run.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Starting partition for Lloyd (id,cluster CSV).
    #[arg(long, requires = "input")]
    pub partition: Option<PathBuf>,
    /// Number of clusters; taken from --partition when omitted.
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long, default_value_t = 0.1)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 0.2)]
    pub delta: f64,
    #[arg(long)]
    pub nprime: Option<usize>,
    /// Bound used when --nprime is absent (instance mode); see `project`.
    #[arg(long, value_enum, default_value_t = Bound::Auto)]
    pub bound: Bound,
    /// Orthonormalize the rows; implied by the implicit bound.
    #[arg(long)]
    pub orthogonalize: bool,
    #[arg(long, default_value_t = 100)]
    pub random_partitions: usize,
    #[arg(long, default_value_t = 100)]
    pub trials: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Per-trial CSV (a directory in harness mode).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ClusterabilityArgs {
    /// Dataset of at most 14 points; without it the seeded harnesses run.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long, default_value_t = 2)]
    pub k: usize,
    #[arg(long, default_value_t = 0.1)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 0.45)]
    pub delta: f64,
    #[arg(long)]
    pub nprime: Option<usize>,
    /// Perturbation level to check on the original data (at most 12 points).
    #[arg(long)]
    pub s: Option<f64>,
    #[arg(long, default_value_t = 20)]
    pub perturbations: u64,
    #[arg(long, default_value_t = 100)]
    pub trials: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Transport report CSV (a directory in harness mode).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long)]
    pub k: usize,
    /// Comma-separated cluster sizes, one per cluster.
    #[arg(long, value_delimiter = ',', required = true)]
    pub sizes: Vec<usize>,
    #[arg(long)]
    pub dim: usize,
    /// Minimum relative gap g in (0, 2].
    #[arg(long)]
    pub gap: f64,
    #[arg(long, default_value_t = 10.0)]
    pub centre_distance: f64,
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "data.bin")]
    pub out: PathBuf,
    #[arg(long, default_value = "truth.csv")]
    pub partition_out: PathBuf,
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<JlError>() {
            return if e.is_validation() { 2 } else { 1 };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return 1;
        }
    }
    2
}

fn run(cli: Cli) -> anyhow::Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }
    match cli.command {
        Command::Dim(a) => commands::dim(&a),
        Command::Reproduce(a) => commands::reproduce(&a),
        Command::Project(a) => commands::project(&a),
        Command::Verify(a) => commands::verify(&a),
        Command::KmeansCompare(a) => commands::kmeans_compare(&a),
        Command::Clusterability(a) => commands::clusterability(&a),
        Command::Gen(a) => commands::gen(&a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
