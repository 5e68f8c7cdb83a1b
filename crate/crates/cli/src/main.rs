use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    let cli = actscore_cli::Cli::parse();
    match actscore_cli::run(cli) {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", e.line());
            ExitCode::FAILURE
        }
    }
}
