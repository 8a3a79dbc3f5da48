//! Experiment configuration: a TOML file with sections, overridden by flags.
//!
//! ```toml
//! seed = 7
//! threads = 4
//! budget_bytes = 1073741824
//! override_constants = true
//! output = "report.json"
//!
//! [set]
//! s_prime = ["a", "b"]      # or: file = "s_prime.json"
//! ratio = "9/10"
//! additive = 4
//! min_k_prime = 1
//!
//! [pivot]
//! d = "22"                  # marking constant; defaults to 2K
//! ```

use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use pivotal::census::DEFAULT_BUDGET_BYTES;
use pivotal::pivot::{PivotEngine, PivotParams};
use pivotal::scalar::parse_rational;
use pivotal::schottky::{build_generating_set, BuildOptions, PopulatedGeneratingSet};
use pivotal::{Half, ReducedWord};
use serde::{Deserialize, Serialize};

use crate::GlobalArgs;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    /// Worker threads; 0 uses every core.
    pub threads: usize,
    pub budget_bytes: u64,
    pub override_constants: bool,
    /// Accept unreduced words and reduce them.
    pub reduce: bool,
    pub output: Option<PathBuf>,
    pub set: SetConfig,
    pub pivot: PivotConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SetConfig {
    /// Inline `S′`.
    pub s_prime: Vec<String>,
    /// JSON file holding `S′` as a list of words; replaces `s_prime`.
    pub file: Option<PathBuf>,
    pub ratio: String,
    pub additive: i64,
    pub min_k_prime: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PivotConfig {
    /// Marking constant `D`; `2K` when absent.
    pub d: Option<String>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 1,
            threads: 0,
            budget_bytes: DEFAULT_BUDGET_BYTES,
            override_constants: false,
            reduce: false,
            output: None,
            set: SetConfig::default(),
            pivot: PivotConfig::default(),
        }
    }
}

impl Default for SetConfig {
    fn default() -> Self {
        SetConfig {
            s_prime: vec!["a".into(), "b".into()],
            file: None,
            ratio: "9/10".into(),
            additive: 4,
            min_k_prime: 1,
        }
    }
}

impl ExperimentConfig {
    /// Defaults, then the file, then flags.
    pub fn load(global: &GlobalArgs) -> Result<Self> {
        let mut cfg = match &global.config {
            Some(path) => Self::from_file(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(seed) = global.seed {
            cfg.seed = seed;
        }
        if let Some(threads) = global.threads {
            cfg.threads = threads;
        }
        if let Some(budget) = global.budget_bytes {
            cfg.budget_bytes = budget;
        }
        cfg.override_constants |= global.override_constants;
        cfg.reduce |= global.reduce;
        if global.output.is_some() {
            cfg.output = global.output.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let cfg: ExperimentConfig =
            toml::from_str(&text).map_err(|e| pivotal::Error::Parse(format!("{}: {e}", path.display())))?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        if let Some(file) = &self.set.file {
            if !file.exists() {
                bail!(pivotal::Error::Precondition(format!("set file {} does not exist", file.display())));
            }
        }
        parse_rational(&self.set.ratio)?;
        if let Some(d) = &self.pivot.d {
            d.parse::<Half>()?;
        }
        Ok(())
    }

    pub fn parse_word(&self, text: &str) -> Result<ReducedWord> {
        let word = if self.reduce {
            ReducedWord::parse_reducing(text)
        } else {
            ReducedWord::parse(text)
        };
        Ok(word?)
    }

    pub fn s_prime(&self) -> Result<Vec<ReducedWord>> {
        let texts: Vec<String> = match &self.set.file {
            Some(path) => {
                let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                serde_json::from_str(&text).map_err(|e| pivotal::Error::Parse(format!("{}: {e}", path.display())))?
            }
            None => self.set.s_prime.clone(),
        };
        texts.iter().map(|t| self.parse_word(t)).collect()
    }

    pub fn build_options(&self) -> Result<BuildOptions> {
        Ok(BuildOptions {
            ratio: parse_rational(&self.set.ratio)?,
            additive: self.set.additive,
            min_k_prime: self.set.min_k_prime,
            override_constants: self.override_constants,
        })
    }

    /// The nicely populated generating set described by `[set]`.
    pub fn generating_set(&self) -> Result<Arc<PopulatedGeneratingSet>> {
        let built = build_generating_set(&self.s_prime()?, &self.build_options()?)?;
        Ok(Arc::new(built))
    }

    pub fn engine(&self) -> Result<PivotEngine> {
        let set = self.generating_set()?;
        let mut params = PivotParams::for_set(&set);
        if let Some(d) = &self.pivot.d {
            params.d = d.parse()?;
        }
        Ok(PivotEngine::new(set, params)?)
    }
}
