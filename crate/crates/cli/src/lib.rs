//! Command-line front end of the `hybreg` toolkit.
//!
//! Each subcommand is a plain function in [`commands`] taking a resolved
//! [`RunConfig`], so tests can drive the pipeline without spawning a
//! process.

pub mod archive;
pub mod commands;
pub mod config;
pub mod error;
pub mod fsio;
pub mod report;
pub mod svg;

use std::path::PathBuf;

pub use archive::ModelArchive;
pub use config::{Cli, Command, DataSource, PlotKind, ReportFormat, RunArgs, RunConfig};
pub use error::{CliError, Result};

/// Executes a parsed command line and returns the files it wrote.
pub fn run(cli: Cli) -> Result<Vec<PathBuf>> {
    let written = match cli.command {
        Command::Synth { n, run } => commands::synth(n, &RunConfig::from_args(&run)?)?,
        Command::Scan(run) => commands::scan(&RunConfig::from_args(&run)?)?.written,
        Command::Train(run) => commands::train(&RunConfig::from_args(&run)?)?.written,
        Command::Predict {
            archive,
            input,
            run,
        } => commands::predict(&archive, &input, &RunConfig::from_args(&run)?.out)?,
        Command::Plot {
            what,
            artifacts,
            run,
        } => {
            let out = RunConfig::from_args(&run)?.out;
            let artifacts = artifacts.unwrap_or_else(|| out.clone());
            commands::plot(what, &artifacts, &out)?
        }
        Command::Compare(run) => commands::compare(&RunConfig::from_args(&run)?)?.written,
    };
    Ok(written.0)
}
