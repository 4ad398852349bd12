//! `wildarc` — build, certify, and export the wild-arc constructions from
//! the command line.
//!
//! Exit codes: 0 success, 2 certification failure, 3 I/O error,
//! 4 configuration error (including usage errors).

mod args;
mod commands;
mod config;

use clap::error::ErrorKind;
use clap::Parser;

use args::{Cli, Command};

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp
                | ErrorKind::DisplayVersion
                | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => 0,
                _ => 4,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    let shared = &cli.shared;
    let result = match &cli.command {
        Command::BuildArc(a) => commands::build_arc(shared, a),
        Command::VerifyArc(a) => commands::verify_arc(shared, a),
        Command::FlowField(a) => commands::flow_field(shared, a),
        Command::FixedPoints(a) => commands::fixed_points(shared, a),
        Command::Orbit(a) => commands::orbit(shared, a),
        Command::Separatrix(a) => commands::separatrix(shared, a),
        Command::Pixton(a) => commands::pixton(shared, a),
        Command::Surgery(a) => commands::surgery(shared, a),
        Command::Export(a) => commands::export_geometry(shared, a),
    };
    if let Err(failure) = result {
        eprintln!("error: {}", failure.message());
        std::process::exit(failure.exit_code());
    }
}
