use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use signorini_lab::config::ConfigSource;
use signorini_lab::error::LabError;
use signorini_lab::{runner, Format};

#[derive(Parser)]
#[command(
    name = "signorini-lab",
    version,
    about = "Thin obstacle solver laboratory: scenario solves, diagnostics, and reports"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Root directory for run artifacts.
    #[arg(long, global = true, default_value = "runs")]
    out: PathBuf,
    /// Worker threads for independent diagnostics.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
    /// Seed for the randomized oracle comparison trials.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Format of the consolidated summary.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a scenario (builtin name or TOML path) and write artifacts.
    Solve { config: String },
    /// Run the configured penalization epsilon sweep.
    Sweep { config: String },
    /// Solve (reusing the cache) and run the configured diagnostics.
    Diagnose { config: String },
    /// Consolidate a run directory into a summary with invariant flags.
    Report { dir: PathBuf },
    /// Cross-check the solver against active-set enumeration on small grids.
    OracleCompare { config: String },
}

fn dispatch(cli: &Cli) -> Result<serde_json::Value, LabError> {
    match &cli.command {
        Command::Solve { config } => {
            let source = ConfigSource::load(config)?;
            let run = runner::run_solve(&source, &cli.out)?;
            Ok(serde_json::json!({
                "scenario": run.scenario.config.name,
                "dir": run.dir,
                "cached": run.cached,
                "iterations": run.report.iterations,
                "max_pde_residual": run.report.max_pde_residual,
                "wall_seconds": run.wall_seconds,
            }))
        }
        Command::Sweep { config } => {
            let source = ConfigSource::load(config)?;
            let run = runner::run_solve(&source, &cli.out)?;
            let rows = runner::run_sweep(&run)?;
            Ok(serde_json::json!({
                "scenario": run.scenario.config.name,
                "dir": run.dir,
                "epsilon_sweep": rows,
            }))
        }
        Command::Diagnose { config } => {
            let source = ConfigSource::load(config)?;
            let run = runner::run_solve(&source, &cli.out)?;
            let diag = runner::run_diagnostics(&run, cli.threads.max(1))?;
            Ok(serde_json::json!({
                "scenario": run.scenario.config.name,
                "dir": run.dir,
                "cached": run.cached,
                "contact_nodes": diag.coin.contact.len(),
                "alpha_u": diag.report.alpha_u.exponent.is_finite()
                    .then_some(1.0 + diag.report.alpha_u.exponent),
                "alpha_sigma": diag.report.alpha_sigma.exponent.is_finite()
                    .then_some(diag.report.alpha_sigma.exponent),
                "sigma_min": diag.report.sigma_min,
                "barrier_samples": diag.barrier.len(),
            }))
        }
        Command::Report { dir } => {
            let summary = runner::emit_report(dir, cli.format)?;
            Ok(serde_json::to_value(&summary).expect("summary serializes"))
        }
        Command::OracleCompare { config } => {
            let source = ConfigSource::load(config)?;
            let cmp = runner::oracle_compare(&source, &cli.out, cli.seed, 20)?;
            Ok(serde_json::to_value(&cmp).expect("comparison serializes"))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(value) => {
            println!("{value}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", e.record());
            ExitCode::FAILURE
        }
    }
}
