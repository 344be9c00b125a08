use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    panos_cli::init_logging();
    match panos_cli::run(panos_cli::Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
