//! `qrc`: run reservoir experiments from a config file.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::warn;

use qreservoir::experiment::{dump_circuit, load_config, run_experiment, write_artifacts};

#[derive(Parser, Debug)]
#[command(name = "qrc", about = "Quantum reservoir computing experiments", disable_version_flag = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train on the task, forecast, and write the artifacts.
    Run {
        config: PathBuf,
        /// Output directory
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Print the circuit built from the first N steps of the task.
    DumpCircuit {
        config: PathBuf,
        #[arg(long, default_value_t = 3)]
        steps: usize,
    },
    /// Print the version.
    Version,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> qreservoir::Result<()> {
    match cli.command {
        Command::Run { config, out } => {
            let (config, warnings) = load_config(&config)?;
            for w in warnings {
                warn!("{w}");
            }
            let output = run_experiment(&config)?;
            write_artifacts(&output, &out)?;
            print!("{}", output.metrics.to_text());
            println!("artifacts written to {}", out.display());
        }
        Command::DumpCircuit { config, steps } => {
            let (config, warnings) = load_config(&config)?;
            for w in warnings {
                warn!("{w}");
            }
            print!("{}", dump_circuit(&config, steps)?);
        }
        Command::Version => println!("qrc {}", env!("CARGO_PKG_VERSION")),
    }
    Ok(())
}
