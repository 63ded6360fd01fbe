use clap::{Parser, Subcommand};

use damvi_cli::commands::{
    cmd_compare, cmd_evaluate, cmd_sweep, cmd_train, CompareArgs, EvaluateArgs, SweepArgs,
    TrainArgs,
};
use damvi_cli::CliError;

/// Diversity-aware weighted majority votes for imbalanced binary
/// classification.
#[derive(Parser)]
#[command(name = "damvi", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a weighted majority vote and write model.json + report.json.
    Train(TrainArgs),
    /// Score a saved model on a CSV dataset.
    Evaluate(EvaluateArgs),
    /// Compare methods over repeated random splits.
    Compare(CompareArgs),
    /// Compare methods across an imbalance-ratio grid.
    Sweep(SweepArgs),
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Train(args) => cmd_train(&args),
        Command::Evaluate(args) => {
            let json = cmd_evaluate(&args)?;
            println!("{json}");
            Ok(())
        }
        Command::Compare(args) => cmd_compare(&args),
        Command::Sweep(args) => cmd_sweep(&args),
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
