//! Command-line front end: reads system, kernel and response files,
//! runs the library's checks, and emits text or structured reports.

mod checks;
mod commands;
mod input;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use output::{write_report, CliError, EXIT_USAGE};

#[derive(Parser)]
#[command(
    name = "nerode",
    version,
    about = "State-space reduction, realization and echo-property diagnostics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Decide whether the echo property holds for a system file.
    CheckEsp {
        /// State-space or finite system, JSON.
        file: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Reduce a system to canonical form and verify the result.
    Reduce {
        /// State-space or finite system, JSON.
        file: PathBuf,
        /// Impulse-response length used by the verification.
        #[arg(long, default_value_t = 200)]
        horizon: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Realize a kernel window or measured response as a state-space system.
    Realize {
        /// Kernel window (field psi) or measured response
        /// (fields coefficients, tail_bound), JSON.
        file: PathBuf,
        /// Accuracy budget for an approximate fit; exact when omitted.
        #[arg(long)]
        eps: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Compare two state-space systems by impulse response and recover
    /// an isomorphism when both are canonical.
    Compare {
        /// Left state-space system, JSON.
        file_a: PathBuf,
        /// Right state-space system, JSON.
        file_b: PathBuf,
        /// Number of impulse-response coefficients compared.
        #[arg(long, default_value_t = 200)]
        horizon: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Run the finite-system cross-check suite.
    Oracle {
        /// Finite system, JSON.
        file: PathBuf,
        /// Random words drawn for the sampled checks.
        #[arg(long, default_value_t = 100)]
        trials: usize,
        /// Seed for the sampled checks.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Structured,
}

#[derive(Args)]
struct Common {
    /// Rank and verification tolerance.
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    /// Safety margin separating the spectral radius from 1.
    #[arg(long, default_value_t = 1e-8)]
    margin: f64,
    /// Report format.
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Write the report here instead of stdout (atomic rename).
    #[arg(long)]
    output: Option<PathBuf>,
}

fn positive(name: &str, value: f64) -> Result<(), CliError> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(CliError::usage(format!("--{name} must be positive, got {value}")))
    }
}

fn run(cli: Cli) -> Result<u8, CliError> {
    let (emitted, common) = match &cli.command {
        Command::CheckEsp { file, common } => {
            positive("margin", common.margin)?;
            (commands::check_esp(file, common.margin)?, common)
        }
        Command::Reduce { file, horizon, common } => {
            positive("tol", common.tol)?;
            positive("margin", common.margin)?;
            (commands::reduce_cmd(file, common.tol, common.margin, *horizon)?, common)
        }
        Command::Realize { file, eps, common } => {
            positive("tol", common.tol)?;
            if let Some(eps) = eps {
                positive("eps", *eps)?;
            }
            (commands::realize(file, common.tol, *eps)?, common)
        }
        Command::Compare { file_a, file_b, horizon, common } => {
            positive("tol", common.tol)?;
            positive("margin", common.margin)?;
            (commands::compare(file_a, file_b, common.tol, common.margin, *horizon)?, common)
        }
        Command::Oracle { file, trials, seed, common } => {
            (commands::oracle(file, *trials, *seed)?, common)
        }
    };
    let body = match common.format {
        Format::Text => &emitted.text,
        Format::Structured => &emitted.structured,
    };
    write_report(common.output.as_deref(), body)?;
    Ok(emitted.code)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            use clap::error::ErrorKind;
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => EXIT_USAGE,
            };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {}", err.message);
            ExitCode::from(err.code)
        }
    }
}
