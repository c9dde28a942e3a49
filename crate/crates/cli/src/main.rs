use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod check;
mod commands;
mod source;
mod sweep;

#[derive(Debug, Parser)]
#[command(name = "qcl", version, about = "Quantized consensus simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate one scenario and write trajectory and report files.
    Run(commands::RunArgs),
    /// Evaluate the convergence-time bound for a time-invariant scenario.
    Bound(commands::BoundArgs),
    /// Run a parameter grid and print a summary table.
    Sweep(sweep::SweepArgs),
    /// Run the invariant suites.
    Check(check::CheckArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => commands::run(&args),
        Command::Bound(args) => commands::bound(&args),
        Command::Sweep(args) => sweep::sweep(&args),
        Command::Check(args) => check::check(&args),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
