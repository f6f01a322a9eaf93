use std::process::ExitCode;

use clap::Parser;
use dance_cli::{run, Cli};

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(warnings) => {
            let n = warnings.items().len();
            if n > 0 {
                eprintln!("{n} warning{}", if n == 1 { "" } else { "s" });
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
