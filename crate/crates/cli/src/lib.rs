//! Command-line driver: `bars`, `analyze`, `synth` and `plot`.

pub mod args;
pub mod commands;
pub mod document;
pub mod manifest;
pub mod svg;

pub use args::Cli;

use args::Command;
use commands::Outcome;

pub const EXIT_OK: u8 = 0;
/// At least one (market, time frame) analysis failed; the rest were written.
pub const EXIT_PARTIAL: u8 = 1;
/// Usage, configuration or input error; nothing was analysed.
pub const EXIT_USAGE: u8 = 2;

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: Cli) -> u8 {
    let result = match &cli.command {
        Command::Bars(a) => commands::bars(a),
        Command::Analyze(a) => commands::analyze(a),
        Command::Synth(a) => commands::synth(a),
        Command::Plot(a) => commands::plot(a),
    };
    match result {
        Ok(Outcome::Success) => EXIT_OK,
        Ok(Outcome::PartialFailure) => EXIT_PARTIAL,
        Err(e) => {
            eprintln!("error: {e:#}");
            EXIT_USAGE
        }
    }
}
