use anyhow::Result;
use clap::{Args, Subcommand, ValueEnum};
use pivotal::geometry::{minimal_witness_constant, ConfigSampler, FactId, HypothesisParams};
use pivotal::Half;
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::report::emit_json;

#[derive(Subcommand, Debug)]
pub enum GeometryCmd {
    /// Least constant for which a fact's conclusion holds on sampled configurations.
    SearchConstants(SearchArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplerKind {
    Geodesic,
    Uniform,
}

#[derive(Args, Debug, Serialize)]
pub struct SearchArgs {
    /// farSegment, oneSegment, concat, concatUlt or passerBy.
    #[arg(long)]
    pub fact: String,
    /// The fact's input constant.
    #[arg(long, default_value = "1")]
    pub input: String,
    /// Length threshold L.
    #[arg(long, default_value = "8")]
    pub l: String,
    #[arg(long, default_value_t = 10_000)]
    pub trials: usize,
    #[arg(long, value_enum, default_value_t = SamplerKind::Geodesic)]
    pub sampler: SamplerKind,
    #[arg(long, default_value_t = 2)]
    pub rank: usize,
    #[arg(long, default_value_t = 64)]
    pub max_len: usize,
    #[arg(long, default_value_t = 3)]
    pub max_hair: usize,
}

pub fn run(cfg: &ExperimentConfig, cmd: GeometryCmd) -> Result<()> {
    match cmd {
        GeometryCmd::SearchConstants(args) => {
            let fact: FactId = args.fact.parse()?;
            let hyp = HypothesisParams {
                input: args.input.parse::<Half>()?,
                l: args.l.parse::<Half>()?,
            };
            let sampler = match args.sampler {
                SamplerKind::Geodesic => ConfigSampler::Geodesic {
                    rank: args.rank,
                    max_len: args.max_len,
                    max_hair: args.max_hair,
                },
                SamplerKind::Uniform => ConfigSampler::Uniform {
                    rank: args.rank,
                    max_len: args.max_len,
                },
            };
            let report = minimal_witness_constant(&sampler, fact, hyp, args.trials, cfg.seed)?;
            emit_json(cfg, "geometry search-constants", &args, &report)
        }
    }
}
