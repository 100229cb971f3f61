//! Command-line front end: flag and config-file parsing, scan orchestration,
//! CSV trajectories and JSON reports.

pub mod args;
pub mod config;
pub mod output;
pub mod run;

use std::ffi::OsString;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{CommandFactory, FromArgMatches};
use thiserror::Error;

pub use args::Cli;

/// Environment variable capping the worker count; `0` means one per core.
pub const THREADS_ENV: &str = "PT_SPECTRA_THREADS";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Numerical(pt_spectra::Error),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl From<pt_spectra::Error> for CliError {
    fn from(e: pt_spectra::Error) -> Self {
        if e.is_invalid_input() {
            CliError::Config(e.to_string())
        } else {
            CliError::Numerical(e)
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Io { .. } => 1,
            CliError::Numerical(_) => 2,
        }
    }

    /// Single-line diagnostic, `error[<kind>]: <message>`.
    pub fn diagnostic(&self) -> String {
        let kind = match self {
            CliError::Config(_) => "config",
            CliError::Numerical(_) => "numerical",
            CliError::Io { .. } => "io",
        };
        let msg = self.to_string().replace(['\n', '\r'], " ");
        format!("error[{kind}]: {}", msg.trim())
    }
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .map_err(|_| CliError::Config(format!("{THREADS_ENV} must be a count, got {raw:?}")))?;
    // a second initialisation in the same process keeps the first pool
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

/// Parse `args` (program name first) and run; `Ok(None)` after help or version output.
pub fn run_args(args: Vec<OsString>) -> Result<Option<()>, CliError> {
    let args = config::expand_args(args)?;
    // config entries come first, so a repeated flag must replace rather than conflict
    let command = Cli::command().mut_subcommands(|c| c.args_override_self(true));
    let cli = match command
        .try_get_matches_from(args)
        .and_then(|m| Cli::from_arg_matches(&m))
    {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return Ok(None);
        }
        Err(e) => {
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("invalid arguments");
            return Err(CliError::Config(first.trim_start_matches("error: ").to_string()));
        }
    };
    configure_threads()?;
    run::execute(&cli.command).map(Some)
}

/// Process entry point: diagnostics go to stderr, the exit code encodes the error class.
pub fn main_entry(args: impl IntoIterator<Item = OsString>) -> ExitCode {
    match run_args(args.into_iter().collect()) {
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.diagnostic());
            ExitCode::from(e.exit_code())
        }
    }
}
