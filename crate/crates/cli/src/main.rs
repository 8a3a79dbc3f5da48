//! `pivotal`: command-line front end for the free-group random-walk laboratory.
//!
//! Exit codes: 0 success, 1 a checked property failed, 2 usage or input
//! error, 3 capacity (memory budget or size limit) exceeded.

mod commands;
mod config;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::ExperimentConfig;

#[derive(Parser, Debug)]
#[command(name = "pivotal", version = report::version(), about = "Random walks, Schottky sets and pivotal times on free groups")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone, Default)]
pub struct GlobalArgs {
    /// TOML experiment configuration; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed for all sampling.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Cap on worker threads (0 uses every core).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Memory budget for exact enumerations.
    #[arg(long, global = true, env = "PIVOTAL_BUDGET_BYTES")]
    pub budget_bytes: Option<u64>,
    /// Skip the K' > 2L + 5000F gate when building generating sets.
    #[arg(long, global = true)]
    pub override_constants: bool,
    /// Accept unreduced words on input and reduce them.
    #[arg(long, global = true)]
    pub reduce: bool,
    /// Write the report here instead of standard output.
    #[arg(long, short, global = true)]
    pub output: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build or check Schottky sets.
    #[command(subcommand)]
    Schottky(commands::schottky::SchottkyCmd),
    /// Empirical constants of the fellow-travelling facts.
    #[command(subcommand)]
    Geometry(commands::geometry::GeometryCmd),
    /// Monte Carlo estimates over random walks.
    #[command(subcommand)]
    Walk(commands::walk::WalkCmd),
    /// Pivotal times of single trajectories.
    #[command(subcommand)]
    Pivots(commands::pivots::PivotsCmd),
    /// Exact lattice-point counts.
    #[command(subcommand)]
    Census(commands::census::CensusCmd),
    /// Recompute the headline numbers in one table.
    Reproduce(commands::reproduce::ReproduceArgs),
}

/// A checked property did not hold; maps to exit code 1.
#[derive(Debug)]
pub struct CheckFailed(pub String);

impl std::fmt::Display for CheckFailed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "check failed: {}", self.0)
    }
}

impl std::error::Error for CheckFailed {}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<CheckFailed>().is_some() {
        return 1;
    }
    match err.downcast_ref::<pivotal::Error>() {
        Some(pivotal::Error::Capacity(_)) => 3,
        Some(
            pivotal::Error::Parse(_)
            | pivotal::Error::Precondition(_)
            | pivotal::Error::Unsupported(_)
            | pivotal::Error::MalformedChain(_),
        ) => 2,
        _ => 1,
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let cfg = ExperimentConfig::load(&cli.global)?;
    if cfg.threads > 0 {
        rayon::ThreadPoolBuilder::new().num_threads(cfg.threads).build_global()?;
    }
    match cli.command {
        Command::Schottky(cmd) => commands::schottky::run(&cfg, cmd),
        Command::Geometry(cmd) => commands::geometry::run(&cfg, cmd),
        Command::Walk(cmd) => commands::walk::run(&cfg, cmd),
        Command::Pivots(cmd) => commands::pivots::run(&cfg, cmd),
        Command::Census(cmd) => commands::census::run(&cfg, cmd),
        Command::Reproduce(args) => commands::reproduce::run(&cfg, args),
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
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
