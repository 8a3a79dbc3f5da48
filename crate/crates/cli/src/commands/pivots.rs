use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, Subcommand};
use pivotal::pivot::{PivotEngine, Side, Trajectory};
use pivotal::walk::{sample_path, WalkConfig};
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::report::emit_json;
use crate::CheckFailed;

#[derive(Subcommand, Debug)]
pub enum PivotsCmd {
    /// Run the state machine on one trajectory.
    Run(RunArgs),
    /// Exhaustive substitution at two pivotal times of a conforming trajectory.
    Harness(HarnessArgs),
}

#[derive(Args, Debug, Serialize)]
pub struct RunArgs {
    /// JSON file `{"steps": [word, ...]}`; every step must lie in the generating set.
    #[arg(long, conflicts_with_all = ["n", "trial"])]
    pub traj: Option<PathBuf>,
    /// Sample a walk of this length instead.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub trial: u64,
}

#[derive(Args, Debug, Serialize)]
pub struct HarnessArgs {
    #[arg(long, default_value_t = 60)]
    pub n: usize,
    /// Use this trial; otherwise the first conforming trial is taken.
    #[arg(long)]
    pub trial: Option<u64>,
    /// Ordinal of the first pivotal time (1-based).
    #[arg(long, default_value_t = 1)]
    pub k: usize,
    /// Ordinal of the second pivotal time; defaults to floor(n/12).
    #[arg(long)]
    pub k_prime: Option<usize>,
    /// Trials scanned for a conforming trajectory.
    #[arg(long, default_value_t = 10_000)]
    pub max_attempts: u64,
}

#[derive(Deserialize)]
struct TrajFile {
    steps: Vec<String>,
}

#[derive(Serialize)]
struct HarnessOutput {
    trial: u64,
    passed: bool,
    #[serde(flatten)]
    report: pivotal::pivot::HarnessReport,
}

fn load_traj(cfg: &ExperimentConfig, engine: &PivotEngine, path: &PathBuf) -> Result<Trajectory> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let file: TrajFile =
        serde_json::from_str(&text).map_err(|e| pivotal::Error::Parse(format!("{}: {e}", path.display())))?;
    let words = file.steps.iter().map(|s| cfg.parse_word(s)).collect::<Result<Vec<_>>>()?;
    Ok(Trajectory::from_words(engine.set().set.clone(), &words)?)
}

pub fn run(cfg: &ExperimentConfig, cmd: PivotsCmd) -> Result<()> {
    let engine = cfg.engine()?;
    let gen = engine.set().set.clone();
    match cmd {
        PivotsCmd::Run(args) => {
            let traj = match (&args.traj, args.n) {
                (Some(path), _) => load_traj(cfg, &engine, path)?,
                (None, Some(n)) => sample_path(&gen, &WalkConfig::new(cfg.seed, n, args.trial + 1)?, args.trial)?,
                (None, None) => {
                    return Err(pivotal::Error::Precondition("give --traj or --n".into()).into());
                }
            };
            let result = engine.run(&traj)?;
            let report = engine.report(&traj, &result)?;
            emit_json(cfg, "pivots run", &args, &report)
        }
        PivotsCmd::Harness(args) => {
            let walk = WalkConfig::new(cfg.seed, args.n, args.max_attempts)?;
            let k_prime = args.k_prime.unwrap_or(args.n / 12);
            let candidates: Vec<u64> = match args.trial {
                Some(t) => vec![t],
                None => (0..args.max_attempts).collect(),
            };
            for trial in candidates {
                let traj = sample_path(&gen, &walk, trial)?;
                let result = engine.run(&traj)?;
                let stats = engine.class_stats(&traj, &result);
                if args.trial.is_none() && !(stats.in_scope && stats.side == Side::Front) {
                    continue;
                }
                let report = engine.translation_harness(&traj, &result, args.k, k_prime)?;
                let passed = report.passed() && report.excluded.len() <= 2 && report.excluded_prime.len() <= 2;
                let output = HarnessOutput { trial, passed, report };
                emit_json(cfg, "pivots harness", &args, &output)?;
                return if passed {
                    Ok(())
                } else {
                    Err(CheckFailed(format!("translation-length harness failed on trial {trial}")).into())
                };
            }
            Err(pivotal::Error::Precondition(format!(
                "no conforming trajectory among {} trials",
                args.max_attempts
            ))
            .into())
        }
    }
}
