mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Joint diagonalization toolkit: identifiability certificates, algebraic
/// solvers, statistic estimation and seeded experiments.
#[derive(Debug, Parser)]
#[command(name = "nujd", version, about)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalOpts,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalOpts {
    /// Collinearity tolerance for `check`, residual tolerance for `solve`.
    #[arg(long, global = true, value_parser = positive)]
    pub tol: Option<f64>,
    /// Certification margin used by `simulate` (overrides the config).
    #[arg(long, global = true, value_parser = positive)]
    pub margin: Option<f64>,
    /// Base seed used by `simulate` (overrides the config).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Certify essential uniqueness of a matrix set or spectra file.
    Check {
        /// Matrix-set or spectra JSON file.
        file: PathBuf,
    },
    /// Jointly diagonalize a two-matrix set.
    Solve {
        /// Matrix-set JSON file with two matrices.
        file: PathBuf,
        #[arg(long, value_enum, default_value_t = Method::Put)]
        method: Method,
        /// Write the result here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Estimate statistic matrices from a signal file.
    Estimate(EstimateArgs),
    /// Run a seeded experiment from a config file.
    Simulate {
        /// Experiment config JSON file.
        config: PathBuf,
        /// Write the report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Put,
    Sut,
    Gevd,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    /// Signal JSON file.
    pub signal: PathBuf,
    /// Covariance E[w wᴴ].
    #[arg(long)]
    pub cov: bool,
    /// Pseudo-covariance E[w wᵀ].
    #[arg(long)]
    pub pseudocov: bool,
    /// Lagged autocorrelation (Hermitian part) and pseudo-autocorrelation.
    #[arg(long = "lag", value_name = "N")]
    pub lags: Vec<usize>,
    /// Covariance over samples S..S+L (1-based start).
    #[arg(long = "window", value_name = "S:L")]
    pub windows: Vec<String>,
    /// Fourth-order cumulant slice: pattern, free axes "p,q", fixed channels
    /// "i,j" (1-based).
    #[arg(long = "cum4", num_args = 3, value_names = ["PATTERN", "AXES", "FIXED"])]
    pub cum4: Vec<String>,
    /// Write the matrix set here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn positive(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(v),
        Ok(v) => Err(format!("must be positive and finite, got {v}")),
        Err(e) => Err(e.to_string()),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(failure) => {
            eprintln!("error: {:#}", failure.error);
            ExitCode::from(failure.code)
        }
    }
}
