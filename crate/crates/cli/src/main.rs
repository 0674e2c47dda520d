mod commands;
mod input;
mod report;

use std::process::ExitCode;

use clap::Parser;

use commands::{Cli, Failure};

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(&cli) {
        Ok((report, code)) => {
            let text = serde_json::to_string_pretty(&report).expect("reports serialize");
            println!("{text}");
            ExitCode::from(code)
        }
        Err(Failure::Input(msg)) => {
            eprintln!("input error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Engine(msg)) => {
            eprintln!("engine error: {msg}");
            ExitCode::from(3)
        }
    }
}
