//! `bures-flow selftest`: runs the full property/acceptance suite, prints one
//! pass/fail line per criterion, and optionally writes the JSON report.

use std::process::ExitCode;

use clap::Args;

use bures_core::selftest::{run_all, Mutation, ToleranceProfile};

#[derive(Args)]
pub struct SelftestArgs {
    /// Tolerance profile.
    #[arg(long, value_parser = ["default", "strict"], default_value = "default")]
    tolerance: String,
    /// Write the machine-readable report here.
    #[arg(long, value_name = "PATH")]
    json_report: Option<std::path::PathBuf>,
    /// Fault-injection hook: flip the log map's sign to prove the suite
    /// catches it.
    #[arg(long, hide = true)]
    inject_log_sign_flip: bool,
}

pub fn run(args: &SelftestArgs) -> ExitCode {
    let profile = ToleranceProfile::by_name(&args.tolerance).expect("clap-validated");
    let mutation = if args.inject_log_sign_flip {
        Mutation::LogMapSignFlip
    } else {
        Mutation::None
    };

    let report = run_all(&profile, mutation);
    // Timings go to stderr and the JSON report; stdout stays a pure function
    // of argv so reruns are diffable.
    for c in &report.criteria {
        println!(
            "{} {} — {}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.detail
        );
    }
    println!(
        "selftest {}: {}/{} criteria passed (profile {})",
        if report.passed { "passed" } else { "FAILED" },
        report.criteria.iter().filter(|c| c.passed).count(),
        report.criteria.len(),
        report.profile
    );
    eprintln!("completed in {:.2}s", report.wall_time_seconds);

    if let Some(path) = &args.json_report {
        let json = serde_json::to_string_pretty(&report).expect("serializable");
        if let Err(err) = std::fs::write(path, json) {
            eprintln!("error: cannot write report {}: {err}", path.display());
            return ExitCode::from(2);
        }
    }

    if report.passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
