//! `pyramidnet`: train pyramid-circuit orthogonal networks, check the unary
//! simulator, demo tomography, time update steps and export layer matrices.

mod config;
mod export;
mod failure;
mod scaling;
mod tomo;
mod train;
mod verify;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use failure::Failure;

#[derive(Parser, Debug)]
#[command(name = "pyramidnet", version, about)]
#[command(after_help = "Exit codes: 0 success, 2 config error, 3 data error, 4 check failure.")]
struct Cli {
    /// JSON file with flat keys named like the long flags (snake_case);
    /// flags given on the command line take precedence.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train a pyramid network (or a dense baseline) and write per-minibatch metrics.
    Train(train::TrainArgs),
    /// Check the simulator against the classical layers for a range of sizes.
    QsimVerify(verify::VerifyArgs),
    /// Run both tomography procedures on a random layer and report errors.
    TomoDemo(tomo::TomoArgs),
    /// Time one update step, pyramid against SVB, as the width grows.
    BenchScaling(scaling::ScalingArgs),
    /// Write a layer's matrix to CSV, or decompose an imported one into angles.
    ExportMatrix(export::ExportArgs),
}

pub(crate) fn write_output(path: &Path, contents: &str) -> Result<(), Failure> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)
            .map_err(|e| Failure::config(format!("cannot create {}: {e}", dir.display())))?;
    }
    std::fs::write(path, contents).map_err(|e| Failure::config(format!("cannot write {}: {e}", path.display())))
}

fn run(cli: Cli) -> Result<(), Failure> {
    let config = cli.config.as_deref();
    match cli.command {
        Command::Train(a) => train::run(config::resolve(a, config)?),
        Command::QsimVerify(a) => verify::run(config::resolve(a, config)?),
        Command::TomoDemo(a) => tomo::run(config::resolve(a, config)?),
        Command::BenchScaling(a) => scaling::run(config::resolve(a, config)?),
        Command::ExportMatrix(a) => export::run(config::resolve(a, config)?),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let _ = std::io::stdout().flush();
            eprintln!("error: {f}");
            f.exit_code()
        }
    }
}
