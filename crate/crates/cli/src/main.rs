//! `equiwave <command> --scenario <path> [--out <dir>] [--seed <u64>]`
//!
//! Exit codes: 0 every verdict passed, 1 some verdict failed, 2 configuration
//! or input error, 3 numerical error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use equiwave::runner::{exit_code, run, run_closed_forms, Command, Outcome};
use equiwave::scenario::Scenario;
use equiwave::{Error, Result};

#[derive(Parser, Debug)]
#[command(name = "equiwave", version, about = "Equivariant wave maps on rotationally symmetric manifolds")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(clap::Args, Debug)]
struct ScenarioArgs {
    /// Scenario JSON file.
    #[arg(long)]
    scenario: PathBuf,
    /// Output directory (overrides the scenario's `output`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for the test families (overrides the scenario's `seed`).
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Admissibility of the manifold profile.
    Verify(ScenarioArgs),
    /// Reduced potential, indices and spectrum.
    Reduce(ScenarioArgs),
    /// Hardy, smoothing, Strichartz and norm checks listed in the scenario.
    Estimates(ScenarioArgs),
    /// Nonlinear evolution with diagnostics.
    Evolve(ScenarioArgs),
    /// Every stage in order.
    All(ScenarioArgs),
    /// Numerical reproduction of the model closed forms.
    ClosedForms {
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn configure_threads() -> Result<()> {
    if let Ok(v) = std::env::var("EQUIWAVE_THREADS") {
        let n: usize = v
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("EQUIWAVE_THREADS = {v:?} is not a positive integer")))?;
        if n == 0 {
            return Err(Error::Config("EQUIWAVE_THREADS must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(e.to_string()))?;
    }
    Ok(())
}

fn execute(cmd: Cmd) -> Result<Outcome> {
    configure_threads()?;
    let (command, args) = match cmd {
        Cmd::ClosedForms { out } => {
            let outcome = run_closed_forms()?;
            if let Some(dir) = out {
                outcome.write(&dir)?;
            }
            return Ok(outcome);
        }
        Cmd::Verify(a) => (Command::Verify, a),
        Cmd::Reduce(a) => (Command::Reduce, a),
        Cmd::Estimates(a) => (Command::Estimates, a),
        Cmd::Evolve(a) => (Command::Evolve, a),
        Cmd::All(a) => (Command::All, a),
    };
    let scenario = Scenario::load(&args.scenario)?;
    let seed = args.seed.unwrap_or(scenario.seed);
    let outcome = run(command, &scenario, seed)?;
    let dir = args
        .out
        .or_else(|| scenario.output.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    outcome.write(&dir)?;
    Ok(outcome)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = execute(cli.command);
    match &result {
        Ok(outcome) => eprint!("{}", outcome.report.summary_table()),
        Err(e) => eprintln!("error: {e}"),
    }
    ExitCode::from(exit_code(&result) as u8)
}
