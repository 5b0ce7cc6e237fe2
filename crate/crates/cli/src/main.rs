mod args;
mod commands;
mod error;
mod report;
mod settings;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};
use error::CliError;
use report::Outcome;
use settings::Settings;

fn run(cli: Cli) -> Result<(Outcome, String), CliError> {
    let mut s = Settings::load(cli.config.as_deref())?;
    let outcome = match cli.command {
        Command::Bryant(a) => commands::bryant(a, &mut s),
        Command::Barrier(a) => commands::barrier(a, &mut s),
        Command::Spectral(a) => commands::spectral(a, &mut s),
        Command::Flow(a) => commands::flow(a, &mut s),
        Command::Residual(a) => commands::residual(a, &mut s),
        Command::Predict(a) => commands::predict(a, &mut s),
    }?;
    s.finish()?;
    let text = outcome.write(&cli.out)?;
    Ok((outcome, text))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (quiet, json_only, out) = (cli.quiet, cli.json_only, cli.out.clone());
    match run(cli) {
        Ok((outcome, text)) => {
            if json_only {
                print!("{text}");
            } else if !quiet {
                for c in &outcome.checks {
                    println!("{} {:<28} {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
                }
                println!("{}: wrote {}", outcome.command, out.join("summary.json").display());
            }
            if outcome.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            if !quiet {
                eprintln!("ricci-lab: {e}");
            }
            ExitCode::from(e.exit_code())
        }
    }
}
