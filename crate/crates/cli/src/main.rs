use std::process::ExitCode;

use clap::Parser;
use magnonic_cli::{run, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("magnonic: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
