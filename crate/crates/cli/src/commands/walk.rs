use anyhow::Result;
use clap::{Args, Subcommand};
use pivotal::scalar::parse_rational;
use pivotal::walk::{estimate_event, WalkConfig, WalkEvent};
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::report::emit_json;

#[derive(Subcommand, Debug)]
pub enum WalkCmd {
    /// Estimate the probability of a registry event at one walk length.
    Estimate(EstimateArgs),
}

#[derive(Args, Debug, Serialize)]
pub struct EstimateArgs {
    /// short-translation, few-pivots, criterion-A-failure or no-pivots.
    #[arg(long)]
    pub event: String,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 10_000)]
    pub trials: u64,
    /// Threshold ratio for short-translation (tau <= L n); defaults to K'/24.
    #[arg(long)]
    pub l: Option<String>,
}

pub fn run(cfg: &ExperimentConfig, cmd: WalkCmd) -> Result<()> {
    match cmd {
        WalkCmd::Estimate(args) => {
            let engine = cfg.engine()?;
            let l = args.l.as_deref().map(parse_rational).transpose()?;
            let event = WalkEvent::parse(&args.event, l, engine.params().k_prime)?;
            let walk = WalkConfig::new(cfg.seed, args.n, args.trials)?;
            let report = estimate_event(&engine, &event, &walk)?;
            emit_json(cfg, "walk estimate", &args, &report)
        }
    }
}
