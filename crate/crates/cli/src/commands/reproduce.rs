use anyhow::Result;
use clap::{Args, ValueEnum};
use pivotal::census::returns_dp;
use pivotal::scalar::ratio_to_f64;
use pivotal::walk::{estimate_event, iid_pivot_distribution, WalkConfig, WalkEvent};
use pivotal::{Rational, ReducedWord};
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::report::{emit_json, version};
use crate::CheckFailed;

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Table,
    Json,
}

#[derive(Args, Debug, Serialize)]
pub struct ReproduceArgs {
    /// Walk lengths for the decay curve.
    #[arg(long, value_delimiter = ',', default_value = "40,80,120,160")]
    pub ns: Vec<usize>,
    /// Trials per walk length.
    #[arg(long, default_value_t = 10_000)]
    pub trials: u64,
    /// Half-lengths m of the return-count ratio series B(2m+2)/B(2m).
    #[arg(long, value_delimiter = ',', default_value = "1,10,50,100,200,400")]
    pub ms: Vec<usize>,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    pub format: Format,
}

#[derive(Serialize)]
struct Row {
    quantity: String,
    value: String,
    expected: String,
    /// `None` for rows that are reported but not checked.
    matches: Option<bool>,
}

fn checked(quantity: impl Into<String>, value: impl ToString, expected: impl ToString) -> Row {
    let (value, expected) = (value.to_string(), expected.to_string());
    Row {
        quantity: quantity.into(),
        matches: Some(value == expected),
        value,
        expected,
    }
}

fn reported(quantity: impl Into<String>, value: impl Into<String>, expected: impl Into<String>) -> Row {
    Row {
        quantity: quantity.into(),
        value: value.into(),
        expected: expected.into(),
        matches: None,
    }
}

/// The decay curve always uses desk-scale constants: with the `K′` gate in
/// force each Schottky element has about 4·10⁵ letters and a single walk of
/// length 160 no longer fits in memory. The embedded configuration records
/// the override.
pub fn run(cfg: &ExperimentConfig, args: ReproduceArgs) -> Result<()> {
    let cfg = &ExperimentConfig {
        override_constants: true,
        ..cfg.clone()
    };
    let mut rows = Vec::new();

    let word = ReducedWord::parse("ABaaabaaBBAABAAAba")?;
    rows.push(checked(format!("d(o, g o) for g = {word}"), word.len(), 18));
    rows.push(checked(format!("tau(g) for g = {word}"), word.translation_length(), 2));

    let (_, moments) = iid_pivot_distribution();
    rows.push(checked("E[X]", &moments.mean, "71/90"));
    rows.push(checked("E[1.4^-X]", &moments.exp_moment, "1188/1505"));

    for &m in &args.ms {
        let ratio = Rational::new(returns_dp(6, 2 * m + 2)?.into(), returns_dp(6, 2 * m)?.into());
        rows.push(reported(
            format!("B(2m+2)/B(2m), degree 6, m = {m}"),
            format!("{:.6}", ratio_to_f64(&ratio)),
            "-> 20",
        ));
    }

    let engine = cfg.engine()?;
    let event = WalkEvent::parse("short-translation", None, engine.params().k_prime)?;
    for &n in &args.ns {
        let walk = WalkConfig::new(cfg.seed, n, args.trials)?;
        let est = estimate_event(&engine, &event, &walk)?;
        rows.push(reported(
            format!("P(tau <= K'n/24), n = {n}, K' = {}", engine.params().k_prime),
            format!(
                "{}/{} [{:.4e}, {:.4e}]",
                est.successes,
                est.trials,
                ratio_to_f64(&est.ci_low),
                ratio_to_f64(&est.ci_high)
            ),
            "decreasing in n",
        ));
    }

    match args.format {
        Format::Json => emit_json(cfg, "reproduce", &args, &rows)?,
        Format::Table => print_table(cfg, &rows)?,
    }
    let bad: Vec<&str> = rows
        .iter()
        .filter(|r| r.matches == Some(false))
        .map(|r| r.quantity.as_str())
        .collect();
    if bad.is_empty() {
        Ok(())
    } else {
        Err(CheckFailed(format!("mismatched values: {}", bad.join("; "))).into())
    }
}

fn print_table(cfg: &ExperimentConfig, rows: &[Row]) -> Result<()> {
    use std::io::Write;
    let widths = [
        rows.iter().map(|r| r.quantity.len()).max().unwrap_or(0).max(8),
        rows.iter().map(|r| r.value.len()).max().unwrap_or(0).max(5),
        rows.iter().map(|r| r.expected.len()).max().unwrap_or(0).max(8),
    ];
    let mut out: Box<dyn Write> = match &cfg.output {
        Some(path) => Box::new(std::fs::File::create(path)?),
        None => Box::new(std::io::stdout().lock()),
    };
    writeln!(out, "# pivotal {} seed {}", version(), cfg.seed)?;
    writeln!(
        out,
        "{:<w0$}  {:<w1$}  {:<w2$}  status",
        "quantity",
        "value",
        "expected",
        w0 = widths[0],
        w1 = widths[1],
        w2 = widths[2]
    )?;
    for r in rows {
        let status = match r.matches {
            Some(true) => "ok",
            Some(false) => "MISMATCH",
            None => "-",
        };
        writeln!(
            out,
            "{:<w0$}  {:<w1$}  {:<w2$}  {status}",
            r.quantity,
            r.value,
            r.expected,
            w0 = widths[0],
            w1 = widths[1],
            w2 = widths[2]
        )?;
    }
    Ok(())
}
