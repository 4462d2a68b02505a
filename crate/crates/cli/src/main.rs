//! `bures-flow`: batch experiments, selftests, and ad-hoc geometry queries
//! over the Wasserstein Gaussian tracking library.
//!
//! Exit codes: 0 success, 1 property/selftest failure, 2 usage or input
//! error. All outputs are deterministic given argv, input files, and
//! `BURES_FLOW_THREADS` never changes values, only scheduling.

mod distance;
mod selftest_cmd;
mod track;

use clap::{Parser, Subcommand};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "bures-flow", version, about = "Wasserstein-geometry Gaussian tracking toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute the 2-Wasserstein distance between two Gaussians.
    Distance(distance::DistanceArgs),
    /// Run tracking experiments and write metrics/flow/status files.
    Track(track::TrackArgs),
    /// Run the property and acceptance suite.
    Selftest(selftest_cmd::SelftestArgs),
}

fn main() -> ExitCode {
    init_thread_pool();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Distance(args) => distance::run(&args),
        Command::Track(args) => track::run(&args),
        Command::Selftest(args) => return selftest_cmd::run(&args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}

/// Honors `BURES_FLOW_THREADS` as a cap on internal parallelism.
fn init_thread_pool() {
    if let Ok(v) = std::env::var("BURES_FLOW_THREADS") {
        if let Ok(n) = v.parse::<usize>() {
            if n >= 1 {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
        }
    }
}
