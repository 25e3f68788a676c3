use std::process::ExitCode;

use clap::Parser;

use wmalg_cli::{run, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(outcome) => {
            if cli.global.json {
                println!("{}", outcome.report.to_json());
            } else {
                print!("{}", outcome.summary);
            }
            ExitCode::from(outcome.exit)
        }
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.code)
        }
    }
}
