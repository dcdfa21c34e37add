//! Command-line front end for hypokit.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use hypokit::HypoError;

/// Exit statuses.
pub const EXIT_VALIDATION: u8 = 1;
pub const EXIT_NUMERICAL: u8 = 2;
pub const EXIT_VIOLATION: u8 = 3;

#[derive(Debug, Parser)]
#[command(name = "hypokit", version, about = "Hypocoercivity analysis of dissipative generators")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub opts: Options,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

/// Flags shared by every command.
#[derive(Debug, Clone, Args)]
pub struct Options {
    /// Input file: a JSON matrix, or a JSON field for `lorentz simulate`.
    #[arg(long, global = true)]
    pub input: Option<PathBuf>,
    /// Output file (standard output when absent).
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    /// Output format; each command has its own default.
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Relative rank tolerance.
    #[arg(long = "tol-rank", global = true)]
    pub tol_rank: Option<f64>,
    /// Absolute kappa threshold for the partial-sum index.
    #[arg(long = "tol-kappa", global = true)]
    pub tol_kappa: Option<f64>,
    /// Largest partial-sum order searched.
    #[arg(long = "m-max", global = true)]
    pub m_max: Option<usize>,
    /// Final time.
    #[arg(long, global = true)]
    pub tmax: Option<f64>,
    /// Number of time steps (or samples).
    #[arg(long, global = true)]
    pub steps: Option<usize>,
    /// Velocity cutoff: modes j in [-M, M].
    #[arg(long = "M", global = true)]
    pub velocity_cutoff: Option<usize>,
    /// Spatial cutoff: modes with max(|n1|, |n2|) <= N.
    #[arg(long = "N", global = true)]
    pub spatial_cutoff: Option<usize>,
    /// Seed for randomized subroutines.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Index by all four methods, stability and the short-time fit.
    Analyze,
    /// Staircase form of (R, J) with a structural check.
    Staircase,
    /// Propagator norm curve on [0, tmax].
    Decay,
    /// Truncated Lorentz operator analyses.
    Lorentz {
        #[command(subcommand)]
        command: LorentzCommand,
    },
    /// Emits an example matrix.
    Gallery {
        #[arg(value_enum)]
        name: GalleryName,
        /// Size parameter (k, blocks, dim or k_max).
        size: usize,
    },
}

#[derive(Debug, Subcommand)]
pub enum LorentzCommand {
    /// Truncated coercivity constant.
    Kappa,
    /// Lyapunov margins for |n| = 1..=N.
    Lyapunov,
    /// Short-time constants.
    Constants,
    /// Cubic short-time bound over the lattice.
    Verify,
    /// Decay of a field towards equilibrium.
    Simulate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GalleryName {
    Ck,
    Ek,
    UniformBlockFamily,
    CompactRFamily,
    EkBlockdiag,
    EkRescaled,
}

/// Outcome of a command that ran to completion.
pub struct Report {
    pub text: String,
    /// A checked property failed.
    pub violation: bool,
}

fn exit_status(err: &HypoError) -> u8 {
    if err.is_validation() {
        EXIT_VALIDATION
    } else {
        EXIT_NUMERICAL
    }
}

fn configure_threads() -> Result<(), HypoError> {
    let Ok(value) = std::env::var("HYPOKIT_THREADS") else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| HypoError::Parameter(format!("HYPOKIT_THREADS = {value:?} is not a positive integer")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| HypoError::Parameter(format!("thread pool: {e}")))
}

fn write_output(path: Option<&PathBuf>, text: &str) -> Result<(), HypoError> {
    match path {
        Some(p) => std::fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("invalid arguments");
            eprintln!("{first}");
            return ExitCode::from(EXIT_VALIDATION);
        }
    };
    let result = configure_threads()
        .and_then(|()| commands::run(&cli.command, &cli.opts))
        .and_then(|report| write_output(cli.opts.output.as_ref(), &report.text).map(|()| report));
    match result {
        Ok(report) if report.violation => ExitCode::from(EXIT_VIOLATION),
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_status(&e))
        }
    }
}
