use anyhow::Result;
use clap::{Args, Subcommand};
use pivotal::census::{ball, returns_dp, returns_exact, sequence_count_a, short_translation_from};
use pivotal::scalar::{parse_rational, ratio_to_f64};
use pivotal::{GeneratingSet, GroupContext};
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::report::emit_csv;

#[derive(Subcommand, Debug)]
pub enum CensusCmd {
    /// Ball sizes |B_S(k)| for k = 0..=n.
    Ball(BallArgs),
    /// Closed walks of length n on the regular tree, or trivial-product sequences over a set.
    Returns(ReturnsArgs),
    /// Proportion of B_S(k) with translation length at most L k.
    ShortTau(ShortTauArgs),
    /// A(n) and B(n) for the six-element set {a^2, ab, ba} and inverses.
    Toy(ToyArgs),
}

#[derive(Args, Debug, Serialize)]
pub struct SetArg {
    /// `toy`, `standard:<rank>` or a comma-separated symmetric list of words.
    #[arg(long = "set", default_value = "standard:2")]
    pub set: String,
}

#[derive(Args, Debug, Serialize)]
pub struct BallArgs {
    #[command(flatten)]
    pub set: SetArg,
    #[arg(long)]
    pub n: usize,
}

#[derive(Args, Debug, Serialize)]
pub struct ReturnsArgs {
    /// Degree of the regular tree (even); ignored with --set.
    #[arg(long, default_value_t = 4)]
    pub degree: usize,
    /// Count over this generating set instead of the tree recursion.
    #[arg(long)]
    pub set: Option<String>,
    #[arg(long)]
    pub n: usize,
    /// Emit the whole series for even lengths up to n as CSV.
    #[arg(long)]
    pub series: bool,
}

#[derive(Args, Debug, Serialize)]
pub struct ShortTauArgs {
    #[command(flatten)]
    pub set: SetArg,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value = "1/3")]
    pub l: String,
}

#[derive(Args, Debug, Serialize)]
pub struct ToyArgs {
    #[arg(long, default_value_t = 10)]
    pub n: usize,
}

pub fn toy_set() -> GeneratingSet {
    GeneratingSet::new(
        ["aa", "ab", "ba", "AA", "BA", "AB"]
            .iter()
            .map(|s| pivotal::ReducedWord::parse(s).expect("toy words are reduced"))
            .collect(),
    )
    .expect("toy set is valid")
}

pub fn parse_set(cfg: &ExperimentConfig, spec: &str) -> Result<GeneratingSet> {
    let set = if spec == "toy" {
        toy_set()
    } else if let Some(rank) = spec.strip_prefix("standard:") {
        let rank: usize = rank
            .parse()
            .map_err(|_| pivotal::Error::Parse(format!("bad rank in {spec:?}")))?;
        GroupContext::new(rank)?.standard_basis()
    } else {
        let words = spec.split(',').map(|w| cfg.parse_word(w.trim())).collect::<Result<Vec<_>>>()?;
        GeneratingSet::new(words)?
    };
    Ok(set)
}

pub fn run(cfg: &ExperimentConfig, cmd: CensusCmd) -> Result<()> {
    let budget = cfg.budget_bytes;
    match cmd {
        CensusCmd::Ball(args) => {
            let set = parse_set(cfg, &args.set.set)?;
            let census = ball(&set, args.n, budget)?;
            let rows: Vec<Vec<String>> = (0..=args.n)
                .map(|k| vec![k.to_string(), census.ball_size(k).to_string()])
                .collect();
            emit_csv(cfg, "census ball", &args, &["n", "count"], &rows)
        }
        CensusCmd::Returns(args) => {
            let count = |n: usize| -> Result<String> {
                Ok(match &args.set {
                    Some(spec) => returns_exact(&parse_set(cfg, spec)?, n, budget)?.to_string(),
                    None => returns_dp(args.degree, n)?.to_string(),
                })
            };
            if args.series {
                let rows = (0..=args.n)
                    .step_by(2)
                    .map(|n| Ok(vec![n.to_string(), count(n)?]))
                    .collect::<Result<Vec<_>>>()?;
                emit_csv(cfg, "census returns", &args, &["n", "count"], &rows)
            } else {
                println!("{}", count(args.n)?);
                Ok(())
            }
        }
        CensusCmd::ShortTau(args) => {
            let set = parse_set(cfg, &args.set.set)?;
            let l = parse_rational(&args.l)?;
            let census = ball(&set, args.n, budget)?;
            let rows: Vec<Vec<String>> = (0..=args.n)
                .map(|k| {
                    let p = short_translation_from(&census, k, &l);
                    vec![k.to_string(), p.to_string(), format!("{:.6e}", ratio_to_f64(&p))]
                })
                .collect();
            emit_csv(cfg, "census short-tau", &args, &["n", "proportion", "approx"], &rows)
        }
        CensusCmd::Toy(args) => {
            let set = toy_set();
            let rows = (0..=args.n)
                .map(|n| {
                    let a = sequence_count_a(&set, n, budget)?;
                    let b = returns_exact(&set, n, budget)?;
                    Ok(vec![n.to_string(), a.to_string(), b.to_string()])
                })
                .collect::<Result<Vec<_>>>()?;
            emit_csv(cfg, "census toy", &args, &["n", "A", "B"], &rows)
        }
    }
}
