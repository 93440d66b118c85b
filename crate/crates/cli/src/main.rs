//! `hbm`: batch front end for the spectral workbench.
//!
//! Exit codes: 0 success, 1 usage, 2 invalid input, 3 numerical failure,
//! 4 inequality violation.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use hbm::HbmError;

#[derive(Parser, Debug)]
#[command(
    name = "hbm",
    version,
    about = "Spectral workbench for the Hilbert-Brunn-Minkowski operator"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Global {
    /// Ambient dimension (2 or 3) where no body file fixes it.
    #[arg(long, global = true)]
    pub dim: Option<usize>,
    /// Basis cutoff (at least 4).
    #[arg(long, global = true)]
    pub lmax: Option<usize>,
    /// Tolerance override for the command's main acceptance test.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Seed for randomized corpora.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output file (stdout when absent).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Output format; JSON by default, CSV for `corpus`.
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Lowest eigenvalues of -L_K with multiplicities, lambda_2 and lambda_{1,e}.
    Spectrum {
        body: PathBuf,
        /// Number of eigenvalues.
        #[arg(long, default_value_t = 16)]
        count: usize,
    },
    /// Evaluates both sides of one inequality.
    Check {
        #[arg(value_enum)]
        inequality: Inequality,
        /// Body files; the count depends on the inequality.
        bodies: Vec<PathBuf>,
    },
    /// Planar solutions by fold symmetry, against the predicted branch set.
    Classify {
        #[arg(long, allow_hyphen_values = true)]
        p: f64,
        /// Directory for one profile CSV per solution.
        #[arg(long)]
        profiles: Option<PathBuf>,
    },
    /// Damped Newton solve of h^{1-p} det(D^2 h) = 1 and the uniqueness hypotheses.
    Solve {
        #[arg(long, allow_hyphen_values = true)]
        p: f64,
        /// `ball`, `perturbed`, `ellipsoid` or a body file.
        #[arg(long, default_value = "perturbed")]
        init: String,
        #[arg(long, default_value_t = 1.0)]
        damping: f64,
    },
    /// S_2-isotropic position of a body.
    Isotropize { body: PathBuf },
    /// Inequality suite over a seeded random corpus.
    Corpus {
        #[arg(long, default_value_t = hbm::corpus::DEFAULT_CASES)]
        cases: usize,
        #[arg(long, default_value_t = hbm::corpus::DEFAULT_AMPLITUDE)]
        amplitude: f64,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Inequality {
    LocalBm,
    LocalAf,
    SpectralGap,
    Reverse,
    ReverseSpectral,
    StabilityBm,
    MinkowskiSecond,
    Symmetric,
    RatioBm,
    Xk,
    HeintzeKarcher,
}

/// Failure with its exit code.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Hbm(HbmError),
    Violation(String),
}

impl From<HbmError> for Failure {
    fn from(e: HbmError) -> Self {
        Failure::Hbm(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Hbm(HbmError::Io(e))
    }
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Violation(_) => 4,
            Failure::Hbm(e) => match e {
                HbmError::UnsupportedDimension(_)
                | HbmError::CutoffTooSmall(_)
                | HbmError::LengthMismatch { .. }
                | HbmError::DomainMismatch
                | HbmError::NotPositive { .. }
                | HbmError::NotConvex { .. }
                | HbmError::NotSymmetric { .. }
                | HbmError::MeanNotZero { .. }
                | HbmError::WrongDimension { .. }
                | HbmError::TupleLength { .. }
                | HbmError::SingularMap
                | HbmError::InvalidDefinition(_)
                | HbmError::Json(_)
                | HbmError::Io(_) => 2,
                HbmError::NotPositiveDefinite(_)
                | HbmError::MaxIterExceeded(_)
                | HbmError::NewtonDiverged { .. }
                | HbmError::NotConvexDuringIteration { .. }
                | HbmError::Eigensolver(_) => 3,
            },
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Usage(m) => write!(f, "usage: {m}"),
            Failure::Hbm(e) => write!(f, "{e}"),
            Failure::Violation(m) => write!(f, "violation: {m}"),
        }
    }
}

fn configure_threads() {
    if let Some(n) = std::env::var("HBM_NUM_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
    {
        if n > 0 {
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global();
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    configure_threads();
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("hbm: {f}");
            ExitCode::from(f.code())
        }
    }
}
