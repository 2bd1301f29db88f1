use std::path::PathBuf;
use std::process::ExitCode;

use biot_cli::{run, Mode, RunManifest};
use clap::Parser;

/// Nonlinear poroelasticity solver and verification drivers.
#[derive(Debug, Parser)]
#[command(name = "biot", version)]
struct Args {
    /// Scenario file (JSON).
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Seed for the randomized operator battery.
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, value_enum, default_value = "solve")]
    mode: Mode,
    /// Single sweep with the permeability argument lagged by one step.
    #[arg(long)]
    per_step_lagged_k: bool,
    /// Record wall-clock time in the iteration log (breaks bitwise
    /// reproducibility of that file).
    #[arg(long)]
    timing: bool,
    /// Increase log verbosity (-v, -vv).
    #[arg(short, long, action = clap::ArgAction::Count)]
    verbose: u8,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let level = match args.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let manifest = RunManifest {
        mode: args.mode,
        scenario: args.scenario,
        out: args.out,
        seed: args.seed,
        per_step_lagged: args.per_step_lagged_k,
        timing: args.timing,
    };
    match run(&manifest) {
        Ok(report) => {
            for c in &report.checks {
                println!("{}", c.line());
            }
            if report.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
