//! `tbayes`: simulate degradation panels, fit transition matrices, predict and benchmark.

mod cmd;
mod config;
mod output;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "tbayes", version, about = "Bayesian estimation of Markov transition matrices")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a panel from a preset or a matrix file, with optional masking.
    Simulate(cmd::simulate::SimulateOpts),
    /// Fit a transition matrix to a panel or aggregate counts.
    Fit(cmd::fit::FitOpts),
    /// Predictive state-probability bands and MTTF from a posterior sample.
    Predict(cmd::predict::PredictOpts),
    /// Iterations and wall time to reach R < 1.1 across methods and scenarios.
    Benchmark(cmd::benchmark::BenchmarkOpts),
    /// Check config and data files.
    Validate(cmd::validate::ValidateOpts),
}

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

fn exit_code(err: &anyhow::Error) -> u8 {
    err.chain()
        .find_map(|e| e.downcast_ref::<transition_bayes::Error>())
        .map_or(EXIT_USAGE, |e| {
            if e.is_numerical() {
                EXIT_NUMERICAL
            } else if e.is_data() {
                EXIT_DATA
            } else {
                EXIT_USAGE
            }
        })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Simulate(o) => cmd::simulate::run(o),
        Command::Fit(o) => cmd::fit::run(o),
        Command::Predict(o) => cmd::predict::run(o),
        Command::Benchmark(o) => cmd::benchmark::run(o),
        Command::Validate(o) => cmd::validate::run(o),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
