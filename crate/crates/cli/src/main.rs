use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

mod args;
mod commands;
mod config;
mod error;
mod pgm;

use args::{Cli, Command};
use error::CliError;

fn run(argv: Vec<String>) -> Result<(), CliError> {
    let argv = config::expand(argv)?;
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return Ok(());
            }
            return Err(CliError::Usage(e.to_string().trim_end().to_string()));
        }
    };
    match &cli.command {
        Command::Generate(a) => commands::generate(a),
        Command::Train(a) => commands::train(a),
        Command::Explain(a) => commands::explain(a),
        Command::Evaluate(a) => commands::evaluate(a),
        Command::Baseline(a) => commands::baseline(a),
        Command::Sweep(a) => commands::sweep(a),
        Command::Loso(a) => commands::loso(a),
        Command::Render(a) => commands::render(a),
    }
}

fn main() -> ExitCode {
    match run(std::env::args().collect()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}
