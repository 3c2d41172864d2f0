mod commands;
mod config;
mod error;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::bench::BenchArgs;
use commands::learn::LearnArgs;
use commands::partition::{CompareArgs, PartitionArgs};
use commands::records::GenRecordsArgs;

/// Chunk sizes for heterogeneous processors.
///
/// Exit codes: 0 success, 2 invalid input, 3 resource cap exceeded.
#[derive(Debug, Parser)]
#[command(name = "hetpart", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Split N items over the cluster and write the partition (CSV or JSON).
    Partition(PartitionArgs),
    /// Print the projected makespan of several schemes side by side.
    Compare(CompareArgs),
    /// Paired real-sort runs: proportional split against the chosen scheme.
    Bench(BenchArgs),
    /// Learn a cost model from timings and plan batches with it.
    Learn(LearnArgs),
    /// Write a file of 100-byte sort records.
    GenRecords(GenRecordsArgs),
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Partition(a) => commands::partition::run(a),
        Command::Compare(a) => commands::partition::compare(a),
        Command::Bench(a) => commands::bench::run(a),
        Command::Learn(a) => commands::learn::run(a),
        Command::GenRecords(a) => commands::records::run(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("hetpart: {e}");
            e.exit_code()
        }
    }
}
