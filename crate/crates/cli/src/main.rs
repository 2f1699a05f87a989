//! `unlearn`: patient-wise forgetting experiments end to end.
//!
//! Subcommands: `generate` synthetic patient data, `train` a classifier,
//! `eval` a checkpoint, `sweep` leave-one-patient-out golden retrains,
//! `forget` with calibrated noise levels, and `report` to render result
//! files. Exit codes: 0 success, 1 usage error, 2 run finished but contains
//! partial failures, 3 fatal error.

mod commands;
mod config;

use clap::{Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "unlearn", version, about = "Patient-wise machine unlearning toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic patient dataset plus its ground-truth manifest.
    Generate(commands::generate::GenerateArgs),
    /// Train a classifier and write a checkpoint.
    Train(commands::train::TrainArgs),
    /// Evaluate a checkpoint on dataset splits.
    Eval(commands::eval::EvalArgs),
    /// Leave-one-patient-out golden retraining sweep.
    Sweep(commands::sweep::SweepArgs),
    /// Apply forgetting operators at calibrated noise levels.
    Forget(commands::forget::ForgetArgs),
    /// Render a sweep or forgetting report as text tables and plot data.
    Report(commands::report::ReportArgs),
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_PARTIAL: i32 = 2;
pub const EXIT_FATAL: i32 = 3;

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // Help and version requests are not usage errors.
            use clap::error::ErrorKind;
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
            let _ = err.print();
            std::process::exit(code);
        }
    };
    let outcome = match cli.command {
        Command::Generate(args) => commands::generate::run(args),
        Command::Train(args) => commands::train::run(args),
        Command::Eval(args) => commands::eval::run(args),
        Command::Sweep(args) => commands::sweep::run(args),
        Command::Forget(args) => commands::forget::run(args),
        Command::Report(args) => commands::report::run(args),
    };
    match outcome {
        Ok(partial) => {
            if partial {
                std::process::exit(EXIT_PARTIAL);
            }
        }
        Err(err) => {
            eprintln!("error: {err}");
            std::process::exit(EXIT_FATAL);
        }
    }
}
