use std::io;
use std::process::ExitCode;

use bitwise_nn_cli::bench::{self, BenchArgs};
use bitwise_nn_cli::commands::{self, EvalArgs, TrainBnnArgs, TrainRealArgs};
use clap::{Parser, Subcommand};

/// Train, evaluate and benchmark bitwise neural networks.
#[derive(Parser)]
#[command(name = "bitwise-nn", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Phase 1: train the tanh-compressed real-valued network.
    TrainReal(TrainRealArgs),
    /// Phase 2: ternarize a real model and train it with noisy backpropagation.
    TrainBnn(TrainBnnArgs),
    /// Print the classification error of a model on a data split.
    Eval(EvalArgs),
    /// Compare packed and floating-point forward passes on a random layer.
    Bench(BenchArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut stdout = io::stdout().lock();
    let result = match &cli.command {
        Command::TrainReal(args) => commands::train_real(args, &mut stdout).map(drop),
        Command::TrainBnn(args) => commands::train_bnn(args, &mut stdout).map(drop),
        Command::Eval(args) => commands::eval(args, &mut stdout).map(drop),
        Command::Bench(args) => bench::bench(args, &mut stdout).map(drop),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
