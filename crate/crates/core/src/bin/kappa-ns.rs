use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use kappa_ns::runner_io::{self, RunnerError};

#[derive(Parser)]
#[command(name = "kappa-ns", version, about = "Augmented Navier-Stokes experiment runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run { config: PathBuf },
    /// Parse and validate a config file without running it.
    Validate { config: PathBuf },
    /// Run the parameter sweep of a config file.
    Sweep { config: PathBuf },
    /// Continue a nonlinear run from a checkpoint.
    Resume { config: PathBuf, checkpoint: PathBuf },
}

fn execute(command: Command) -> Result<runner_io::Outcome, RunnerError> {
    runner_io::configure_threads()?;
    match command {
        Command::Run { config } => runner_io::run_experiment(&runner_io::load_config(&config)?),
        Command::Validate { config } => {
            let cfg = runner_io::load_config(&config)?;
            Ok(runner_io::Outcome {
                files: Vec::new(),
                summary: vec![format!("{}: valid {} experiment", config.display(), cfg.kind.name())],
            })
        }
        Command::Sweep { config } => runner_io::run_sweep(&runner_io::load_config(&config)?),
        Command::Resume { config, checkpoint } => {
            runner_io::resume(&runner_io::load_config(&config)?, &checkpoint)
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse().command) {
        Ok(outcome) => {
            for line in &outcome.summary {
                println!("{line}");
            }
            for file in &outcome.files {
                println!("wrote {}", file.display());
            }
            ExitCode::SUCCESS
        }
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
