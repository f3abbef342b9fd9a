//! `daegen` — train a denoising sequence autoencoder on unlabeled text
//! and generate sentences from structured slot data.
//!
//! Subcommands: `prepare` (tokenize/filter/BPE/vocabulary), `corrupt`
//! (inspect the noising pipeline), `train`, `generate`, `evaluate`,
//! `significance`, and `pipeline` (everything end to end).

mod commands;
mod config;
mod errors;

use clap::error::ErrorKind;
use clap::Parser;

use commands::Cli;

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            // Help and version go to stdout, usage errors to stderr, as
            // clap renders them.
            let _ = err.print();
            std::process::exit(code);
        }
    };
    match commands::run(cli) {
        Ok(()) => {}
        Err(err) => {
            eprintln!("error: {err}");
            std::process::exit(err.exit_code());
        }
    }
}
