//! `pomdp-lambda`: validate POMDP files, evaluate lambda-discrepancies and
//! run the memory-learning experiments.
//!
//! Exit codes: 0 success, 1 domain failure (e.g. validation failed),
//! 2 usage or parse error, 3 I/O error.

mod commands;
mod failure;
mod output;
mod source;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{evaluate, optimize, sample, sweeps, validate};
use failure::Failure;

#[derive(Debug, Parser)]
#[command(
    name = "pomdp-lambda",
    version,
    about = "Lambda-discrepancy toolkit for tabular POMDPs"
)]
struct Cli {
    /// Directory for data files and run manifests.
    #[arg(
        long,
        global = true,
        env = "POMDP_LAMBDA_OUT",
        default_value = "pomdp-lambda-out"
    )]
    out: PathBuf,
    /// Worker threads for commands that run in parallel (default: one per core).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse and validate a Cassandra POMDP file.
    Validate(validate::ValidateArgs),
    /// Print closed-form TD(lambda) Q and V tables.
    Solve(evaluate::SolveArgs),
    /// Lambda-discrepancy of a set of policies.
    Discrep(evaluate::DiscrepArgs),
    /// Discrepancy as the fully observed T-maze is blended toward aliasing.
    SweepPo(sweeps::SweepPoArgs),
    /// Memory learning followed by policy improvement, per memory size and seed.
    OptimizeMem(optimize::OptimizeArgs),
    /// Discrepancy of Parity Check under perturbed dynamics or start states.
    ParitySweep(sweeps::ParitySweepArgs),
    /// Compare a sampled discrepancy estimate with the closed form.
    SampleCheck(sample::SampleArgs),
}

fn run(cli: &Cli) -> Result<(), Failure> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::usage(format!("cannot start {n} threads: {e}")))?;
    }
    let out = &cli.out;
    match &cli.command {
        Command::Validate(a) => validate::run(a),
        Command::Solve(a) => evaluate::run_solve(a),
        Command::Discrep(a) => evaluate::run_discrep(a, out),
        Command::SweepPo(a) => sweeps::run_sweep_po(a, out),
        Command::OptimizeMem(a) => optimize::run(a, out),
        Command::ParitySweep(a) => sweeps::run_parity_sweep(a, out),
        Command::SampleCheck(a) => sample::run(a, out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
