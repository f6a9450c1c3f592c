//! `ssm-loom`: aggregate diagrammatic research evidence.
//!
//! Subcommands mirror the synthesis pipeline: `validate` the corpus,
//! recompute `beliefs`, `aggregate` into a synthesis with a summary
//! table, and render the `forest` plot. Exit codes: 0 on success, 1 for
//! domain failures (validation violations, incompatible causes, total
//! conflict), 2 for I/O and parse failures.

mod commands;
mod config;

use clap::{Parser, Subcommand};
use thiserror::Error;

use config::CommonArgs;

#[derive(Debug, Error)]
pub enum AppError {
    /// The inputs are well-formed but the domain rules reject them.
    #[error("{0}")]
    Domain(String),
    /// Missing files, unreadable documents, bad formats.
    #[error("{0}")]
    Io(String),
}

impl AppError {
    pub fn domain(message: impl Into<String>) -> AppError {
        AppError::Domain(message.into())
    }

    pub fn io(message: impl Into<String>) -> AppError {
        AppError::Io(message.into())
    }

    fn exit_code(&self) -> i32 {
        match self {
            AppError::Domain(_) => 1,
            AppError::Io(_) => 2,
        }
    }
}

#[derive(Parser)]
#[command(
    name = "ssm-loom",
    version,
    about = "Aggregates diagrammatic research evidence with Dempster-Shafer belief combination"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check every evidence model in the corpus against the glossary
    Validate {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Recompute belief values from stored improvements and study
    /// quality, or assess a standalone measurement CSV
    Beliefs {
        #[command(flatten)]
        common: CommonArgs,
        /// Standalone measurement CSV (columns: baseline,treated)
        #[arg(long, value_name = "FILE")]
        measurements: Option<std::path::PathBuf>,
        /// Metric name for the standalone series
        #[arg(long, value_name = "NAME", default_value = "metric")]
        metric: String,
        /// Improvement direction: higher-is-better or lower-is-better
        #[arg(long, value_name = "POLARITY", default_value = "higher-is-better")]
        polarity: String,
        /// Study type for the standalone series
        #[arg(long, value_name = "TYPE", default_value = "observational")]
        study_type: String,
        /// Quality score in [0, 1] for the standalone series
        #[arg(long, value_name = "SCORE", default_value_t = 0.5)]
        quality_score: f64,
    },
    /// Aggregate the corpus and write the synthesis artifacts
    Aggregate {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Render the aggregated corpus as a forest plot
    Forest {
        #[command(flatten)]
        common: CommonArgs,
    },
}

/// Die silently on SIGPIPE like other Unix filters instead of
/// panicking when a downstream `head` closes the pipe early.
#[cfg(unix)]
fn reset_sigpipe() {
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
}

#[cfg(not(unix))]
fn reset_sigpipe() {}

fn main() {
    reset_sigpipe();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Validate { common } => commands::cmd_validate(&common),
        Command::Beliefs {
            common,
            measurements,
            metric,
            polarity,
            study_type,
            quality_score,
        } => match measurements {
            Some(path) => {
                commands::cmd_beliefs_series(&path, &metric, &polarity, &study_type, quality_score)
            }
            None => commands::cmd_beliefs(&common),
        },
        Command::Aggregate { common } => commands::cmd_aggregate(&common),
        Command::Forest { common } => commands::cmd_forest(&common),
    };
    if let Err(err) = result {
        eprintln!("error: {err}");
        std::process::exit(err.exit_code());
    }
}
