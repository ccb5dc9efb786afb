use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    let cli = beliefsum::cli::Cli::parse();
    match beliefsum::cli::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                beliefsum::Error::Usage(_) => ExitCode::from(2),
                _ => ExitCode::FAILURE,
            }
        }
    }
}
