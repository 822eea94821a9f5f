//! `tacshear`: command-line pipeline for tactile sim-to-real translation,
//! contact estimation, and closed-loop servo tasks.

use clap::{Parser, Subcommand};
use std::process::ExitCode;

mod commands;
mod config;
mod plot;

#[derive(Parser)]
#[command(
    name = "tacshear",
    version,
    about = "Tactile sim-to-real translation, estimation, and servo-control pipeline"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Collect a paired (sim, real) tactile image dataset.
    Collect(commands::CollectArgs),
    /// Train a sim-to-real translator (pix2pix or shpix2pix).
    TrainTranslator(commands::TrainTranslatorArgs),
    /// Train a Gaussian-density contact estimator.
    TrainEstimator(commands::TrainEstimatorArgs),
    /// Evaluate a translator's image quality on the validation split.
    EvalTranslation(commands::EvalTranslationArgs),
    /// Evaluate an estimator's accuracy against the mean baseline.
    EvalEstimator(commands::EvalEstimatorArgs),
    /// Run a leader/follower tracking or co-lifting task.
    RunTask(commands::RunTaskArgs),
    /// Render a trajectory overlay from a stored task log.
    Plot(commands::PlotArgs),
    /// Run the full pipeline end to end and write a summary report.
    Reproduce(commands::ReproduceArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Collect(args) => commands::collect(args),
        Command::TrainTranslator(args) => commands::train_translator_cmd(args),
        Command::TrainEstimator(args) => commands::train_estimator_cmd(args),
        Command::EvalTranslation(args) => commands::eval_translation_cmd(args),
        Command::EvalEstimator(args) => commands::eval_estimator_cmd(args),
        Command::RunTask(args) => commands::run_task_cmd(args),
        Command::Plot(args) => commands::plot_cmd(args),
        Command::Reproduce(args) => commands::reproduce(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            let is_usage = err.chain().any(|c| {
                c.is::<config::Usage>()
                    || matches!(
                        c.downcast_ref::<tacshear::Error>(),
                        Some(tacshear::Error::Config(_))
                    )
            });
            if is_usage {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
