//! Report emission. Every report carries the version, the master seed, the
//! full configuration and the command arguments, so a report can be re-run.

use std::io::Write;

use anyhow::{Context, Result};
use serde::Serialize;

use crate::config::ExperimentConfig;

/// `git describe` output captured at build time, or the package version.
pub fn version() -> &'static str {
    option_env!("PIVOTAL_GIT_DESCRIBE").unwrap_or(pivotal::VERSION)
}

#[derive(Serialize)]
struct Envelope<'a, A: Serialize, R: Serialize> {
    version: &'a str,
    seed: u64,
    command: &'a str,
    config: &'a ExperimentConfig,
    args: &'a A,
    result: &'a R,
}

fn sink(cfg: &ExperimentConfig) -> Result<Box<dyn Write>> {
    Ok(match &cfg.output {
        Some(path) => Box::new(std::io::BufWriter::new(
            std::fs::File::create(path).with_context(|| format!("creating {}", path.display()))?,
        )),
        None => Box::new(std::io::stdout().lock()),
    })
}

/// Pretty JSON with the reproducibility envelope.
pub fn emit_json<A: Serialize, R: Serialize>(cfg: &ExperimentConfig, command: &str, args: &A, result: &R) -> Result<()> {
    let envelope = Envelope {
        version: version(),
        seed: cfg.seed,
        command,
        config: cfg,
        args,
        result,
    };
    let mut out = sink(cfg)?;
    serde_json::to_writer_pretty(&mut out, &envelope)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

/// CSV preceded by `#` comment lines carrying the envelope as JSON.
pub fn emit_csv<A: Serialize>(
    cfg: &ExperimentConfig,
    command: &str,
    args: &A,
    header: &[&str],
    rows: &[Vec<String>],
) -> Result<()> {
    let mut out = sink(cfg)?;
    writeln!(out, "# version: {}", version())?;
    writeln!(out, "# seed: {}", cfg.seed)?;
    writeln!(out, "# command: {command}")?;
    writeln!(out, "# config: {}", serde_json::to_string(cfg)?)?;
    writeln!(out, "# args: {}", serde_json::to_string(args)?)?;
    {
        let mut w = csv::Writer::from_writer(&mut out);
        w.write_record(header)?;
        for row in rows {
            w.write_record(row)?;
        }
        w.flush()?;
    }
    out.flush()?;
    Ok(())
}
