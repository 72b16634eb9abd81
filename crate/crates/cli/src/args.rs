use std::path::PathBuf;

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "cptr", version, about = "Carbon cost pass-through estimation pipeline")]
#[command(args_override_self = true)]
pub struct Cli {
    /// Parameter config JSON (heat rates, emission factors, phase boundary).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Root seed; required by simulate and quantile.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Directory receiving every output and the run manifest.
    #[arg(long, global = true, default_value = ".")]
    pub out_dir: PathBuf,

    /// Directory searched for upstream artifacts that are not named
    /// explicitly; defaults to the output directory.
    #[arg(long, global = true)]
    pub input_dir: Option<PathBuf>,

    /// Comma-separated zone names.
    #[arg(long, global = true, value_delimiter = ',')]
    pub zones: Vec<String>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build the daily series of one zone from hourly, fuel and carbon files.
    Construct(ConstructArgs),
    /// Descriptive statistics of a series column per zone.
    Describe(DescribeArgs),
    /// ADF and KPSS screening of series columns.
    Unitroot(UnitrootArgs),
    /// Pass-through regression, phase report and robustness variants.
    Fit(FitArgs),
    /// Quantile-regression coefficient paths with bootstrap bands.
    Quantile(QuantileArgs),
    /// Spline smooth of log demand in place of the linear term.
    Gam(GamArgs),
    /// Daily coal/gas switching carbon price.
    Switching(SwitchingArgs),
    /// Assemble tables and plots from upstream outputs.
    Report(ReportArgs),
    /// Generate synthetic zones with known coefficients.
    Simulate(SimulateArgs),
    /// Rerun a command from its manifest and verify its outputs.
    Replay(ReplayArgs),
}

/// Constructed series files; when omitted, `series_<zone>.csv` in the input
/// directory is used for every zone in `--zones`.
#[derive(Debug, Args)]
pub struct SeriesInputs {
    #[arg(long = "series")]
    pub series: Vec<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ConstructArgs {
    #[arg(long)]
    pub zone: Option<String>,
    #[arg(long)]
    pub hourly: PathBuf,
    #[arg(long)]
    pub fuels: PathBuf,
    #[arg(long)]
    pub carbon: PathBuf,
    #[arg(long)]
    pub from: NaiveDate,
    #[arg(long)]
    pub to: NaiveDate,
    /// Replace the zone's demand by that of another zone in this file.
    #[arg(long)]
    pub demand: Option<PathBuf>,
    #[arg(long, requires = "demand")]
    pub demand_zone: Option<String>,
    #[arg(long, default_value_t = 7)]
    pub max_fill_days: i64,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub aligned_out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Split {
    Full,
    Phase3,
    Phase4,
}

#[derive(Debug, Args)]
pub struct DescribeArgs {
    #[command(flatten)]
    pub inputs: SeriesInputs,
    #[arg(long, value_enum, default_value = "full")]
    pub split: Split,
    #[arg(long, default_value = "s")]
    pub column: String,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct UnitrootArgs {
    #[command(flatten)]
    pub inputs: SeriesInputs,
    #[arg(long, value_delimiter = ',', default_value = "s,c,log_d,s_tilde,c_tilde")]
    pub columns: Vec<String>,
    /// `constant` or `trend`.
    #[arg(long, default_value = "constant")]
    pub variant: String,
    #[arg(long)]
    pub max_lag: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub inputs: SeriesInputs,
    /// Model specification JSON.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "baseline")]
    pub variants: Vec<String>,
    #[arg(long)]
    pub out_table: Option<PathBuf>,
    #[arg(long)]
    pub out_phase: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct QuantileArgs {
    #[command(flatten)]
    pub inputs: SeriesInputs,
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    pub taus: Vec<f64>,
    #[arg(long, default_value_t = 1000)]
    pub bootstrap: usize,
    #[arg(long)]
    pub out_table: Option<PathBuf>,
    /// Band file; with several zones the zone name is appended to the stem.
    #[arg(long)]
    pub out_path: Option<PathBuf>,
    #[arg(long)]
    pub plot: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GamArgs {
    #[command(flatten)]
    pub inputs: SeriesInputs,
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long, default_value_t = cptr_core::gam::DEFAULT_K)]
    pub k: usize,
    /// Comma-separated smoothing parameters, or `lo:hi:n` for n log-spaced
    /// values.
    #[arg(long)]
    pub lambda_grid: Option<String>,
    /// `gcv` or `reml`.
    #[arg(long, default_value = "gcv")]
    pub criterion: String,
    #[arg(long)]
    pub out_table: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SwitchingArgs {
    /// Aligned dataset written by `construct`.
    #[arg(long)]
    pub aligned: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub plot: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Bundle directory, relative to the output directory.
    #[arg(long, default_value = "report")]
    pub bundle: PathBuf,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Simulation settings JSON (true coefficients, sample length, drivers).
    #[arg(long)]
    pub sim_config: Option<PathBuf>,
    #[arg(long)]
    pub days: Option<usize>,
    #[arg(long)]
    pub start: Option<NaiveDate>,
    /// Also write the hourly, fuel and carbon input files.
    #[arg(long)]
    pub raw: bool,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    pub manifest: PathBuf,
    /// Directory for the rerun; defaults to `replay_<id>` next to the
    /// manifest.
    #[arg(long)]
    pub into: Option<PathBuf>,
}
