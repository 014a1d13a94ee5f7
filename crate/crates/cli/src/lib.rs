//! File formats and subcommands behind the `haltonmask` binary.

pub mod commands;
pub mod config;
pub mod error;
pub mod io;
pub mod report;
pub mod schedule_file;

use clap::{Parser, Subcommand};

pub use config::{RunArgs, RunConfig};
pub use error::{CliError, Result};

#[derive(Debug, Parser)]
#[command(
    name = "haltonmask",
    version,
    about = "Token-unmasking schedules and their exact information analysis"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a schedule file (OUT/schedule.json).
    Schedule(RunArgs),
    /// Sample with each scheduler and write OUT/metrics.csv and OUT/summary.json.
    Compare(RunArgs),
    /// Write one entropy graymap per step and OUT/entropies.csv.
    EntropyMaps(RunArgs),
}

/// Runs a parsed command, printing a short report on stdout.
pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Schedule(args) => {
            let path = commands::schedule(RunConfig::resolve(&args)?)?;
            println!("wrote {}", path.display());
        }
        Command::Compare(args) => {
            let cfg = RunConfig::resolve(&args)?;
            let out = cfg.out.clone();
            let summary = commands::compare(cfg)?;
            for s in &summary.schedulers {
                match s.aggregate_mi_nats {
                    Some(mi) => println!("{:<10} aggregate_mi_nats={mi:.6}", s.scheduler.name()),
                    None => println!(
                        "{:<10} final_step_entropy_sum_nats={:.6}",
                        s.scheduler.name(),
                        s.final_step_entropy_sum_nats
                    ),
                }
            }
            println!("wrote {}", out.join("metrics.csv").display());
        }
        Command::EntropyMaps(args) => {
            let cfg = RunConfig::resolve(&args)?;
            let out = cfg.out.clone();
            let frames = commands::entropy_maps(cfg)?;
            println!("wrote {frames} frames to {}", out.display());
        }
    }
    Ok(())
}
