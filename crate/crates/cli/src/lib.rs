//! Library side of the `amrace` command-line tool.

pub mod args;
pub mod commands;
pub mod config;

use std::ffi::OsString;

use clap::Parser;
use thiserror::Error;

use args::{Cli, Command};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Validation(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

pub fn run_command(cmd: &Command) -> Result<(), CliError> {
    match cmd {
        Command::BuildTable(a) => commands::build_table_cmd(a),
        Command::Train(a) => commands::train_cmd(a),
        Command::Evaluate(a) => commands::evaluate_cmd(a),
        Command::Rollout(a) => commands::rollout_cmd(a),
        Command::ExportBoundarySlice(a) => commands::export_slice_cmd(a),
    }
}

/// Parses `args` and runs the subcommand. Returns the process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    if let Some(seed) = seed_of(&cli.command) {
        eprintln!("seed: {seed}");
    }
    match run_command(&cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn seed_of(cmd: &Command) -> Option<u64> {
    let common = match cmd {
        Command::Train(a) => &a.common,
        Command::Evaluate(a) => &a.common,
        _ => return None,
    };
    config::RunConfig::resolve(common).ok().map(|c| c.seed)
}
