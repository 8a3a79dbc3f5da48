use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, Subcommand};
use pivotal::schottky::{check_schottky, construct_schottky, SchottkyParams, SchottkySet};
use pivotal::Half;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::report::emit_json;
use crate::CheckFailed;

#[derive(Subcommand, Debug)]
pub enum SchottkyCmd {
    /// Construct and certify a Schottky set from powers of `a` and `b`.
    Build(BuildArgs),
    /// Check the seven properties for given elements and constants.
    Check(CheckArgs),
}

#[derive(Args, Debug, Serialize)]
pub struct BuildArgs {
    /// Minimum number of elements.
    #[arg(long, required_unless_present = "populated")]
    pub size: Option<u64>,
    /// Minimum element length K'.
    #[arg(long, default_value_t = 1)]
    pub k_prime: u64,
    /// Also build the nicely populated generating set from the `[set]` configuration.
    #[arg(long)]
    pub populated: bool,
}

#[derive(Args, Debug, Serialize)]
pub struct CheckArgs {
    /// JSON file `{elements, K, K_prime}` as written by `schottky build`.
    #[arg(long, conflicts_with_all = ["elements", "k", "k_prime"])]
    pub set: Option<PathBuf>,
    /// Comma-separated elements.
    #[arg(long, value_delimiter = ',')]
    pub elements: Vec<String>,
    #[arg(long)]
    pub k: Option<String>,
    #[arg(long)]
    pub k_prime: Option<u64>,
}

#[derive(Serialize)]
struct PopulatedSummary<'a> {
    schottky: &'a SchottkySet,
    generating_set: &'a pivotal::GeneratingSet,
    size: usize,
    schottky_squares: usize,
    constants_overridden: bool,
    census_infeasible: bool,
}

#[derive(Deserialize)]
struct SetFile {
    elements: Vec<String>,
    #[serde(rename = "K")]
    k: Half,
    #[serde(rename = "K_prime")]
    k_prime: u64,
}

pub fn run(cfg: &ExperimentConfig, cmd: SchottkyCmd) -> Result<()> {
    match cmd {
        SchottkyCmd::Build(args) => {
            if args.populated {
                let set = cfg.generating_set()?;
                let summary = PopulatedSummary {
                    schottky: set.s1(),
                    generating_set: &set.set,
                    size: set.set.len(),
                    schottky_squares: set.schottky_square_count(),
                    constants_overridden: set.constants_overridden,
                    census_infeasible: set.census_infeasible,
                };
                emit_json(cfg, "schottky build", &args, &summary)
            } else {
                let set = construct_schottky(args.size.unwrap_or(1), args.k_prime)?;
                emit_json(cfg, "schottky build", &args, &set)
            }
        }
        SchottkyCmd::Check(args) => {
            let (elements, k, k_prime) = match &args.set {
                Some(path) => {
                    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                    let file: SetFile = serde_json::from_str(&text)
                        .map_err(|e| pivotal::Error::Parse(format!("{}: {e}", path.display())))?;
                    (file.elements, file.k, file.k_prime)
                }
                None => {
                    let k = args
                        .k
                        .as_deref()
                        .ok_or_else(|| pivotal::Error::Precondition("--k is required without --set".into()))?
                        .parse()?;
                    let kp = args
                        .k_prime
                        .ok_or_else(|| pivotal::Error::Precondition("--k-prime is required without --set".into()))?;
                    (args.elements.clone(), k, kp)
                }
            };
            let words = elements.iter().map(|e| cfg.parse_word(e)).collect::<Result<Vec<_>>>()?;
            let report = check_schottky(&words, SchottkyParams::new(k, k_prime)?)?;
            emit_json(cfg, "schottky check", &args, &report)?;
            if report.certified() {
                Ok(())
            } else {
                Err(CheckFailed(format!("properties {:?} fail", report.failing())).into())
            }
        }
    }
}
