//! `sofsyn` command-line front end.

mod args;
mod commands;
mod files;
mod svg;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use args::{Cli, Command};

/// Why a command did not succeed; mapped onto the process exit code.
#[derive(Debug)]
pub enum Failure {
    /// The problem was solved but is infeasible, or synthesis failed.
    Unsuccessful(String),
    /// Bad flags, unreadable or malformed files.
    Input(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Unsuccessful(_) => 1,
            Failure::Input(_) => 2,
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(2),
            };
        }
    };
    let outcome = match &cli.command {
        Command::Analyze(a) => commands::analyze(a),
        Command::Synth(a) => commands::synth(a),
        Command::Simulate(a) => commands::simulate(a),
        Command::Robustness(a) => commands::robustness(a),
        Command::Demo(a) => commands::demo(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Unsuccessful(msg) => eprintln!("{msg}"),
                Failure::Input(msg) => eprintln!("error: {msg}"),
            }
            ExitCode::from(f.code())
        }
    }
}
