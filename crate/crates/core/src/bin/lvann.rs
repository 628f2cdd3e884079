use std::process::ExitCode;

use clap::Parser;
use lvann::cli::{exit_code, run, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let stdout = std::io::stdout();
    match run(&cli, &mut stdout.lock()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("lvann: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
