//! Command-line orchestration for the `gbdp` solver: argument parsing,
//! file formats and the subcommand drivers.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

pub mod commands;
pub mod output;

pub use commands::run;

/// Environment variable that overrides the output directory.
pub const OUT_DIR_ENV: &str = "GBDP_OUT_DIR";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Solver(#[from] gbdp::Error),
    /// Bad flag value or unreadable input file.
    #[error("invalid argument `{field}`: {reason}")]
    Argument { field: String, reason: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn argument(field: impl Into<String>, reason: impl Into<String>) -> Self {
        CliError::Argument {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub fn io(path: impl AsRef<Path>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.as_ref().to_path_buf(),
            source,
        }
    }

    /// Process exit code: 2 config, 3 precondition, 4 budget, 1 I/O.
    pub fn exit_code(&self) -> u8 {
        use gbdp::Error as E;
        match self {
            CliError::Argument { .. } => 2,
            CliError::Io { .. } => 1,
            CliError::Solver(e) => match e {
                E::Config { .. } | E::Parse(_) => 2,
                E::Precondition(_) | E::DimensionMismatch(_) => 3,
                E::BudgetExceeded { .. } => 4,
                E::Io(_) => 1,
            },
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "gbdp", version, about = "Cutting-plane dynamic pricing solver")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a cut stack and write trace.csv, fig_converge.csv and cuts.store.
    Train(TrainArgs),
    /// Simulate the greedy policy of a cut store.
    Validate(ValidateArgs),
    /// Confidence bounds from a validation.csv.
    Bounds(BoundsArgs),
    /// Solve a small instance exactly and export the value table.
    Exact(ExactArgs),
    /// Compare a cut store against the exact value table.
    Compare(CompareArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ResampleArg {
    Off,
    Oracle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SearchArg {
    Coordinate,
    FullGrid,
}

impl From<SearchArg> for gbdp::trainer::DecisionSearch {
    fn from(v: SearchArg) -> Self {
        match v {
            SearchArg::Coordinate => Self::Coordinate,
            SearchArg::FullGrid => Self::FullGrid,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GateArg {
    Box,
    Global,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InitArg {
    FixedPoint,
    BigM,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BernsteinArg {
    Variance,
    Literal,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Instance file (TOML).
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long, default_value_t = 100)]
    pub iters: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = ResampleArg::Off)]
    pub resample_mode: ResampleArg,
    /// Output directory; `GBDP_OUT_DIR` overrides the default `.`.
    #[arg(long, env = OUT_DIR_ENV, default_value = ".")]
    pub out_dir: PathBuf,
    #[arg(long, value_enum, default_value_t = SearchArg::Coordinate)]
    pub search: SearchArg,
    /// Domain of the submodularity gate.
    #[arg(long, value_enum, default_value_t = GateArg::Box)]
    pub gate: GateArg,
    #[arg(long, value_enum, default_value_t = InitArg::FixedPoint)]
    pub init: InitArg,
    /// Suppress per-iteration progress on stderr.
    #[arg(long)]
    pub quiet: bool,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(long)]
    pub cuts: PathBuf,
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long, default_value_t = 1000)]
    pub samples: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Output CSV; defaults to validation.csv beside the cut store.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = SearchArg::Coordinate)]
    pub search: SearchArg,
    /// Histogram bins for fig_hist.csv.
    #[arg(long, default_value_t = 20)]
    pub bins: usize,
}

#[derive(Debug, Args)]
pub struct BoundsArgs {
    /// validation.csv written by `validate` (its summary file must sit next to it).
    #[arg(long)]
    pub validation: PathBuf,
    #[arg(long, default_value_t = 0.1)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0.1)]
    pub alpha_e: f64,
    /// Comma-separated bound names or `all`.
    #[arg(long, default_value = "all")]
    pub bounds: String,
    /// `auto` or a value in (0, alpha).
    #[arg(long, default_value = "auto")]
    pub theta_d: String,
    #[arg(long, default_value_t = 0.0)]
    pub theta_c: f64,
    /// Bernstein radius form.
    #[arg(long, value_enum, default_value_t = BernsteinArg::Variance)]
    pub bernstein: BernsteinArg,
    /// Output CSV; defaults to bounds.csv beside the validation file.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExactArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Output CSV; defaults to exact.csv in `GBDP_OUT_DIR` or the working directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Maximum number of one-step evaluations.
    #[arg(long, default_value_t = gbdp::oracle::DEFAULT_BUDGET)]
    pub budget: u128,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub cuts: PathBuf,
    /// Per-state gap CSV; defaults to gaps.csv beside the cut store.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// `explicit`; else `name` inside `GBDP_OUT_DIR` when set; else `name`
/// next to `beside` (or in the working directory).
pub fn resolve_out(explicit: Option<&Path>, name: &str, beside: Option<&Path>) -> PathBuf {
    if let Some(p) = explicit {
        return p.to_path_buf();
    }
    if let Some(dir) = std::env::var_os(OUT_DIR_ENV) {
        return PathBuf::from(dir).join(name);
    }
    match beside.and_then(Path::parent) {
        Some(dir) => dir.join(name),
        None => PathBuf::from(name),
    }
}
