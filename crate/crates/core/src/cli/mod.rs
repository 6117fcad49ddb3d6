//! Command-line front end: `cowlib <subcommand>`.

mod commands;
pub mod config;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub use config::{AnalysisConfig, OutputPaths, SEED_ENV};

use crate::error::Error;

/// Exit code of a successful run.
pub const EXIT_OK: i32 = 0;
/// Unreadable or invalid input.
pub const EXIT_INPUT: i32 = 1;
/// Numerical failure (non-convergence, singular or ill-conditioned problem).
pub const EXIT_NUMERICAL: i32 = 2;
/// More than the tolerated fraction of toys failed.
pub const EXIT_INVALID_ENSEMBLE: i32 = 3;

/// Exit code for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::NotConverged(_)
        | Error::SingularModel(_)
        | Error::IllConditioned { .. }
        | Error::NotARoot { .. }
        | Error::Integration { .. }
        | Error::NonFinite { .. }
        | Error::ZeroDenominator { .. }
        | Error::Envelope { .. } => EXIT_NUMERICAL,
        _ => EXIT_INPUT,
    }
}

#[derive(Debug, Parser)]
#[command(name = "cowlib", version, about = "Signal extraction with sWeights and custom orthogonal weights")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

/// Options shared by the analysis subcommands.
#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Analysis config (JSON); defaults apply to missing fields.
    #[arg(short, long)]
    pub config: Option<PathBuf>,
    /// Data CSV, overriding the config.
    #[arg(short, long)]
    pub data: Option<PathBuf>,
    /// Output directory, overriding the config.
    #[arg(short, long)]
    pub out_dir: Option<PathBuf>,
    /// Mixture model in m (JSON), overriding the config.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Main output file of the subcommand, overriding the config.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Covariance treatment for `correct`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CorrectMode {
    /// Yields and `W` propagated, shapes fixed.
    Fixed,
    /// Full sandwich including the shape parameters.
    Full,
    /// Uncorrected inverse Hessian.
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ConfigKind {
    Analysis,
    Ensemble,
    Toy,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Extended maximum-likelihood fit of the mixture in m.
    Fit(Common),
    /// Per-event sWeights and the W matrix.
    Sweights {
        #[command(flatten)]
        common: Common,
        /// A, B, Ci or Cii; defaults to the config method's variant.
        #[arg(long)]
        variant: Option<String>,
    },
    /// Custom orthogonal weights with a polynomial background.
    Cow {
        #[command(flatten)]
        common: Common,
        /// Bernstein polynomial order of the background.
        #[arg(long)]
        order: Option<usize>,
        /// Histogram bins of q(m).
        #[arg(long, conflicts_with = "unity")]
        bins: Option<usize>,
        /// Use I(m) = 1.
        #[arg(long)]
        unity: bool,
    },
    /// Weighted fit in t with its corrected covariance.
    Correct {
        #[command(flatten)]
        common: Common,
        /// Precomputed weights CSV; its rows must match the data. Without
        /// it the weights come from the configured method.
        #[arg(long)]
        weights: Option<PathBuf>,
        /// Weight column of `--weights`.
        #[arg(long, default_value = "w_sig")]
        column: String,
        /// Control density in t (JSON), overriding the config.
        #[arg(long)]
        control: Option<PathBuf>,
        /// Correction for sWeight methods; external weights allow only `fixed`.
        #[arg(long, value_enum)]
        mode: Option<CorrectMode>,
    },
    /// Kendall rank correlation between two columns.
    CheckIndependence {
        #[arg(short, long)]
        data: PathBuf,
        /// First column (default: the first).
        #[arg(long)]
        x: Option<String>,
        /// Second column (default: the second).
        #[arg(long)]
        y: Option<String>,
        /// Restrict to rows where this column equals `--label`.
        #[arg(long, requires = "label")]
        label_column: Option<String>,
        #[arg(long, requires = "label_column")]
        label: Option<f64>,
        /// Also write the report to this JSON file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Pseudo-experiment ensemble with pull summaries.
    Toys {
        /// Ensemble config (JSON).
        #[arg(short, long)]
        config: Option<PathBuf>,
        /// Report file.
        #[arg(short, long, default_value = "ensemble.json")]
        out: PathBuf,
        /// Worker threads (default: all cores).
        #[arg(short, long)]
        jobs: Option<usize>,
    },
    /// Writes one generated dataset as CSV.
    Generate {
        /// Toy config (JSON).
        #[arg(short, long)]
        config: Option<PathBuf>,
        #[arg(short, long, default_value = "toy.csv")]
        out: PathBuf,
    },
    /// Fit, weights, weighted fit and corrected covariance in one run.
    Pipeline(Common),
    /// Prints the fully resolved config.
    EchoConfig {
        #[arg(short, long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "analysis")]
        kind: ConfigKind,
    },
    /// Prints the tool version.
    Version,
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    match commands::dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
