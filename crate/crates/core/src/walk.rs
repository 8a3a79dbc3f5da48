//! Seeded random walks, the comparison distribution for pivot counts and
//! Monte Carlo estimates.
//!
//! Trial `t` of an experiment with master seed `s` draws from a ChaCha8
//! stream seeded with [`mix_seed`]`(s, t)`, so trials are independent of each
//! other and of the order (or thread) in which they run.

use std::collections::BTreeMap;
use std::sync::Arc;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pivot::{PivotEngine, StageOutcome, Trajectory};
use crate::scalar::{ratio_to_f64, Scalar};
use crate::word::{GeneratingSet, ReducedWord};

/// Depth at which the comparison distribution is truncated.
pub const STEP_DEPTH: i64 = 64;

/// Two-sided 95% normal quantile used for Wilson intervals.
const Z95: f64 = 1.959_963_984_540_054;

/// Derive the seed of trial `trial` from the master seed (SplitMix64 finaliser).
pub fn mix_seed(master: u64, trial: u64) -> u64 {
    let mut z = master ^ trial.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// The random stream of one trial.
pub fn trial_rng(master: u64, trial: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix_seed(master, trial))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WalkConfig {
    pub master_seed: u64,
    pub n_steps: usize,
    pub trials: u64,
}

impl WalkConfig {
    pub fn new(master_seed: u64, n_steps: usize, trials: u64) -> Result<Self> {
        if trials == 0 {
            return Err(Error::Precondition("at least one trial is required".into()));
        }
        if n_steps == 0 {
            return Err(Error::Precondition("walks need at least one step".into()));
        }
        Ok(WalkConfig {
            master_seed,
            n_steps,
            trials,
        })
    }
}

/// `n_steps` generator indices drawn uniformly from a set of the given size.
pub fn sample_indices(set_size: usize, config: &WalkConfig, trial: u64) -> Vec<usize> {
    let mut rng = trial_rng(config.master_seed, trial);
    (0..config.n_steps).map(|_| rng.gen_range(0..set_size)).collect()
}

/// A walk with i.i.d. steps uniform on `gen`.
pub fn sample_path(gen: &Arc<GeneratingSet>, config: &WalkConfig, trial: u64) -> Result<Trajectory> {
    if gen.is_empty() {
        return Err(Error::Precondition("the generating set is empty".into()));
    }
    Trajectory::new(gen.clone(), sample_indices(gen.len(), config, trial))
}

/// Walk whose step after `g` is drawn from `μ` restricted to `S ∖ {g⁻¹}`.
#[derive(Clone, Debug)]
pub struct NonBacktrackingWalk {
    gen: Arc<GeneratingSet>,
    first: WeightedIndex<f64>,
    after: Vec<WeightedIndex<f64>>,
    excluded: Vec<Option<usize>>,
}

impl NonBacktrackingWalk {
    pub fn new(weights: &[(ReducedWord, BigRational)]) -> Result<Self> {
        if weights.iter().any(|(_, p)| !p.is_positive()) {
            return Err(Error::Precondition("weights must be positive".into()));
        }
        if weights.len() < 2 {
            return Err(Error::Precondition(format!(
                "non-backtracking walks need a support of at least two elements, got {}",
                weights.len()
            )));
        }
        let gen = Arc::new(GeneratingSet::new(weights.iter().map(|(w, _)| w.clone()).collect())?);
        let base: Vec<f64> = weights.iter().map(|(_, p)| ratio_to_f64(p)).collect();
        let first = WeightedIndex::new(&base).map_err(|e| Error::Precondition(e.to_string()))?;
        let excluded: Vec<Option<usize>> = gen.elements().iter().map(|g| gen.index_of(&g.inverse())).collect();
        let after = excluded
            .iter()
            .map(|ex| {
                let mut wts = base.clone();
                if let Some(i) = *ex {
                    wts[i] = 0.0;
                }
                WeightedIndex::new(&wts).map_err(|e| Error::Precondition(e.to_string()))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(NonBacktrackingWalk {
            gen,
            first,
            after,
            excluded,
        })
    }

    /// Uniform weights on a set.
    pub fn uniform(set: &GeneratingSet) -> Result<Self> {
        let one = BigRational::one();
        let weights: Vec<_> = set.elements().iter().map(|w| (w.clone(), one.clone())).collect();
        NonBacktrackingWalk::new(&weights)
    }

    pub fn gen_set(&self) -> &Arc<GeneratingSet> {
        &self.gen
    }

    /// Index of the step that may not follow step `i`, if any.
    pub fn excluded_after(&self, i: usize) -> Option<usize> {
        self.excluded[i]
    }

    pub fn sample_indices(&self, config: &WalkConfig, trial: u64) -> Vec<usize> {
        let mut rng = trial_rng(config.master_seed, trial);
        let mut out = Vec::with_capacity(config.n_steps);
        let mut prev = self.first.sample(&mut rng);
        out.push(prev);
        for _ in 1..config.n_steps {
            prev = self.after[prev].sample(&mut rng);
            out.push(prev);
        }
        out
    }

    pub fn sample(&self, config: &WalkConfig, trial: u64) -> Result<Trajectory> {
        Trajectory::new(self.gen.clone(), self.sample_indices(config, trial))
    }
}

/// Law of `X` with `P(X = 1) = 9/10` and `P(X = −j) = 9/10^{j+1}` for `j ≥ 1`,
/// truncated at depth [`STEP_DEPTH`] with the tail mass moved onto the
/// deepest atom.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepDistribution {
    #[serde(with = "crate::scalar::text::map")]
    pub atoms: BTreeMap<i64, BigRational>,
}

/// Exact moments of the untruncated law and of its truncation.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepMoments {
    /// `E[X]` of the untruncated law.
    #[serde(with = "crate::scalar::text")]
    pub mean: BigRational,
    /// `E[1.4^{−X}]` of the untruncated law.
    #[serde(with = "crate::scalar::text")]
    pub exp_moment: BigRational,
    #[serde(with = "crate::scalar::text")]
    pub truncated_mean: BigRational,
    #[serde(with = "crate::scalar::text")]
    pub truncated_exp_moment: BigRational,
    /// Largest gap between a truncated and an exact moment.
    #[serde(with = "crate::scalar::text")]
    pub truncation_error: BigRational,
}

fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

fn pow10(e: u32) -> BigRational {
    BigRational::from_integer(num_traits::pow(BigInt::from(10), e as usize))
}

impl StepDistribution {
    /// The comparison law truncated at `depth ≥ 1`.
    pub fn with_depth(depth: i64) -> Self {
        let mut atoms = BTreeMap::new();
        atoms.insert(1, rat(9, 10));
        for j in 1..depth {
            atoms.insert(-j, rat(9, 1) / pow10(j as u32 + 1));
        }
        // Σ_{j ≥ depth} 9/10^{j+1} = 10^{−depth}
        atoms.insert(-depth, BigRational::one() / pow10(depth as u32));
        StepDistribution { atoms }
    }

    pub fn total_mass(&self) -> BigRational {
        self.atoms.values().cloned().sum()
    }

    pub fn mean(&self) -> BigRational {
        self.atoms
            .iter()
            .map(|(&x, p)| p * BigRational::from_integer(x.into()))
            .sum()
    }

    /// `E[base^{−X}]`.
    pub fn exp_moment(&self, base: &BigRational) -> BigRational {
        self.atoms.iter().map(|(&x, p)| p * Scalar::powi(base, -x as i32)).sum()
    }

    /// Exact law of `X₁ + ⋯ + X_m` for the truncated atoms.
    pub fn convolve(&self, m: usize) -> BTreeMap<i64, BigRational> {
        let mut acc: BTreeMap<i64, BigRational> = BTreeMap::from([(0, BigRational::one())]);
        for _ in 0..m {
            let mut next: BTreeMap<i64, BigRational> = BTreeMap::new();
            for (&s, p) in &acc {
                for (&x, q) in &self.atoms {
                    *next.entry(s + x).or_insert_with(BigRational::zero) += p * q;
                }
            }
            acc = next;
        }
        acc
    }
}

/// The comparison law at depth [`STEP_DEPTH`] and its moments.
pub fn iid_pivot_distribution() -> (StepDistribution, StepMoments) {
    let dist = StepDistribution::with_depth(STEP_DEPTH);
    let base = rat(14, 10);
    // E[X] = 9/10 − (9/10)·Σ j/10^j = 9/10 − (9/10)(10/81)
    let mean = rat(9, 10) - rat(9, 10) * rat(10, 81);
    // E[1.4^{−X}] = (9/10)(5/7) + (9/10)·Σ (14/100)^j = 9/14 + (9/10)(14/86)
    let exp_moment = rat(9, 14) + rat(9, 10) * rat(14, 86);
    let truncated_mean = dist.mean();
    let truncated_exp_moment = dist.exp_moment(&base);
    let truncation_error = (&truncated_mean - &mean).abs().max((&truncated_exp_moment - &exp_moment).abs());
    let moments = StepMoments {
        mean,
        exp_moment,
        truncated_mean,
        truncated_exp_moment,
        truncation_error,
    };
    (dist, moments)
}

/// `P(X₁ + ⋯ + X_m ≤ x)` for the untruncated comparison law, in any scalar.
///
/// With `r` negative steps the sum is `(m − r) − J_r`, where `J_r` is a sum of
/// `r` geometric variables on `{1, 2, …}` with success probability `9/10`,
/// so `P(J_r = r + e) = C(r + e − 1, e) (1/10)^e (9/10)^r`.
pub fn sum_cdf<T: Scalar>(m: usize, x: i64) -> T {
    let p = T::ratio(9, 10);
    let q = T::ratio(1, 10);
    let mi = m as i64;
    let mut total = T::zero();
    let mut binom = T::one();
    for r in 0..=mi {
        if r > 0 {
            binom = binom * T::from_int(mi - r + 1) / T::from_int(r);
        }
        let t = mi - r - x;
        let tail = if r == 0 {
            if t <= 0 {
                T::one()
            } else {
                T::zero()
            }
        } else if t <= r {
            T::one()
        } else {
            // 1 − P(J_r < t)
            let pr = p.powi(r as i32);
            let mut c = T::one();
            let mut qe = T::one();
            let mut below = T::zero();
            for e in 0..t - r {
                if e > 0 {
                    c = c * T::from_int(r + e - 1) / T::from_int(e);
                    qe = qe * q.clone();
                }
                below = below + c.clone() * qe.clone() * pr.clone();
            }
            T::one() - below
        };
        if tail != T::zero() {
            total = total + binom.clone() * p.powi((mi - r) as i32) * q.powi(r as i32) * tail;
        }
    }
    total
}

/// `P(X₁ + ⋯ + X_m ≥ y)` for `m = 0, …, max_m`, exactly.
///
/// Partial sums that can no longer climb back to `y` within `max_m` steps
/// are dropped, which keeps the state space finite. Every path of length `i`
/// has probability `9^i / 10^e`, and the largest `e` reaching sum `s` is
/// `E(i, s) = 2i − 1 − s` (or `i` when `s = i`), so each state is stored as
/// the integer `P(S_i = s)·10^{E(i,s)}/9^i`.
pub fn upper_tail_exact(max_m: usize, y: i64) -> Vec<BigRational> {
    let max_m = max_m as i64;
    let exponent = |i: i64, s: i64| if s == i { i } else { 2 * i - 1 - s };
    let ten = BigUint::from(10u32);
    let tail = |i: i64, states: &BTreeMap<i64, BigUint>| -> BigRational {
        let top = states.range(y..).map(|(&s, _)| exponent(i, s)).max();
        let Some(top) = top else {
            return BigRational::zero();
        };
        let numer: BigUint = states
            .range(y..)
            .map(|(&s, q)| q * num_traits::pow(ten.clone(), (top - exponent(i, s)) as usize))
            .sum();
        let numer = numer * num_traits::pow(BigUint::from(9u32), i as usize);
        BigRational::new(numer.into(), num_traits::pow(BigInt::from(10), top as usize))
    };
    let mut states: BTreeMap<i64, BigUint> = BTreeMap::from([(0, BigUint::one())]);
    let mut out = vec![tail(0, &states)];
    for i in 0..max_m {
        let lo = y - (max_m - i - 1);
        let mut next: BTreeMap<i64, BigUint> = BTreeMap::new();
        for (&s, q) in &states {
            if s + 1 >= lo {
                *next.entry(s + 1).or_default() += q;
            }
            if s > lo {
                let down = if s == i { q.clone() } else { q * &ten };
                for j in 1..=s - lo {
                    *next.entry(s - j).or_default() += &down;
                }
            }
        }
        states = next;
        out.push(tail(i + 1, &states));
    }
    out
}

/// Exact comparison `P(ΣX < n/5) ≤ 1.4^{n/5} E[1.4^{−X}]^m` for `⌈n/3⌉ ≤ m ≤ n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarkovCheck {
    pub n: usize,
    pub holds: bool,
    /// Largest ratio of probability to bound, as a float.
    pub worst_ratio: f64,
}

pub fn markov_check(n: usize) -> MarkovCheck {
    let (_, moments) = iid_pivot_distribution();
    let y = (n as i64 + 4) / 5;
    let tails = upper_tail_exact(n, y);
    let base5 = Scalar::powi(&rat(7, 5), n as i32);
    let mut holds = true;
    let mut worst = 0.0f64;
    for (m, upper) in tails.iter().enumerate().skip(n.div_ceil(3)) {
        let prob = BigRational::one() - upper;
        // Raise both sides to the fifth power to avoid the irrational 1.4^{n/5}.
        let bound5 = &base5 * Scalar::powi(&moments.exp_moment, 5 * m as i32);
        if Scalar::powi(&prob, 5) > bound5 {
            holds = false;
        }
        let ratio = ratio_to_f64(&prob) / (1.4f64.powf(n as f64 / 5.0) * ratio_to_f64(&moments.exp_moment).powi(m as i32));
        worst = worst.max(ratio);
    }
    MarkovCheck {
        n,
        holds,
        worst_ratio: worst,
    }
}

/// The three tail quantities of the final counting argument.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TheoreticalBounds {
    pub n: usize,
    pub set_size: usize,
    /// `(n/3)·0.9ⁿ + 0.9886ⁿ`
    #[serde(with = "crate::scalar::text")]
    pub few_pivots: BigRational,
    /// `(0.2475·#S)^{−⌊n/24⌋}`
    #[serde(with = "crate::scalar::text")]
    pub class_bound: BigRational,
    /// `0.999ⁿ`
    #[serde(with = "crate::scalar::text")]
    pub ball_fraction: BigRational,
}

pub fn theoretical_bounds(n: usize, set_size: usize) -> Result<TheoreticalBounds> {
    if n == 0 {
        return Err(Error::Precondition("n must be positive".into()));
    }
    if set_size == 0 {
        return Err(Error::Precondition("the set must be nonempty".into()));
    }
    let e = n as i32;
    let few_pivots = rat(n as i64, 3) * Scalar::powi(&rat(9, 10), e) + Scalar::powi(&rat(9886, 10000), e);
    let class_bound = Scalar::powi(&(rat(2475, 10000) * rat(set_size as i64, 1)), -((n / 24) as i32));
    let ball_fraction = Scalar::powi(&rat(999, 1000), e);
    Ok(TheoreticalBounds {
        n,
        set_size,
        few_pivots,
        class_bound,
        ball_fraction,
    })
}

/// Monte Carlo estimate of an event probability.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub event: String,
    pub n: usize,
    pub successes: u64,
    pub trials: u64,
    pub seed: u64,
    #[serde(with = "crate::scalar::text")]
    pub p_hat: BigRational,
    #[serde(with = "crate::scalar::text")]
    pub ci_low: BigRational,
    #[serde(with = "crate::scalar::text")]
    pub ci_high: BigRational,
    /// Whether enough trials were run for the interval to be meaningful (`≥ 30`).
    pub ci_valid: bool,
}

impl EstimateReport {
    pub fn from_counts(event: &str, n: usize, successes: u64, trials: u64, seed: u64) -> Self {
        let p_hat = BigRational::new(successes.into(), trials.max(1).into());
        let (lo, hi) = wilson_interval(successes, trials);
        let to_rat = |x: f64| BigRational::from_float(x).unwrap_or_else(BigRational::zero);
        let ci_low = to_rat(lo).clamp(BigRational::zero(), p_hat.clone());
        let ci_high = to_rat(hi).clamp(p_hat.clone(), BigRational::one());
        EstimateReport {
            event: event.to_string(),
            n,
            successes,
            trials,
            seed,
            p_hat,
            ci_low,
            ci_high,
            ci_valid: trials >= 30,
        }
    }

    pub fn p_hat_f64(&self) -> f64 {
        ratio_to_f64(&self.p_hat)
    }
}

/// Wilson score interval at 95% confidence.
pub fn wilson_interval(successes: u64, trials: u64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = Z95 * Z95;
    let centre = (p + z2 / (2.0 * n)) / (1.0 + z2 / n);
    let half = Z95 * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / (1.0 + z2 / n);
    (
        if successes == 0 { 0.0 } else { (centre - half).max(0.0) },
        if successes == trials { 1.0 } else { (centre + half).min(1.0) },
    )
}

/// Estimate `P(event)` over uniform walks on `gen`, in parallel.
pub fn estimate<F>(name: &str, gen: &Arc<GeneratingSet>, config: &WalkConfig, event: F) -> Result<EstimateReport>
where
    F: Fn(&Trajectory) -> bool + Sync,
{
    if gen.is_empty() {
        return Err(Error::Precondition("the generating set is empty".into()));
    }
    let successes = (0..config.trials)
        .into_par_iter()
        .map(|t| sample_path(gen, config, t).map(|traj| u64::from(event(&traj))))
        .try_reduce(|| 0, |a, b| Ok(a + b))?;
    Ok(EstimateReport::from_counts(name, config.n_steps, successes, config.trials, config.master_seed))
}

/// The named events understood by `walk estimate`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum WalkEvent {
    /// `τ(wₙ) ≤ L·n`.
    ShortTranslation { l: BigRational },
    /// `#P*ₙ ≤ n/5`.
    FewPivots,
    /// The last Schottky slot is not accepted by Criterion (A).
    CriterionAFailure,
    /// No pivotal time at all.
    NoPivots,
}

impl WalkEvent {
    pub const NAMES: [&'static str; 4] = ["short-translation", "few-pivots", "criterion-A-failure", "no-pivots"];

    /// Parse a registry name; `short-translation` uses `l`, defaulting to `K′/24`.
    pub fn parse(name: &str, l: Option<BigRational>, k_prime: u64) -> Result<Self> {
        match name {
            "short-translation" => Ok(WalkEvent::ShortTranslation {
                l: l.unwrap_or_else(|| rat(k_prime as i64, 24)),
            }),
            "few-pivots" => Ok(WalkEvent::FewPivots),
            "criterion-A-failure" => Ok(WalkEvent::CriterionAFailure),
            "no-pivots" => Ok(WalkEvent::NoPivots),
            other => Err(Error::Parse(format!(
                "unknown event {other:?}; expected one of {}",
                WalkEvent::NAMES.join(", ")
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            WalkEvent::ShortTranslation { .. } => "short-translation",
            WalkEvent::FewPivots => "few-pivots",
            WalkEvent::CriterionAFailure => "criterion-A-failure",
            WalkEvent::NoPivots => "no-pivots",
        }
    }

    pub fn holds(&self, engine: &PivotEngine, traj: &Trajectory) -> Result<bool> {
        let n = traj.len();
        Ok(match self {
            WalkEvent::ShortTranslation { l } => {
                let tau = traj.endpoint().translation_length();
                BigRational::from_integer(tau.into()) <= l * BigRational::from_integer(n.into())
            }
            WalkEvent::FewPivots => 5 * engine.run(traj)?.pivot_count() <= n,
            WalkEvent::CriterionAFailure => {
                let r = engine.run(traj)?;
                matches!(r.outcomes.last(), Some(o) if *o != StageOutcome::CriterionA)
            }
            WalkEvent::NoPivots => engine.run(traj)?.pivot_count() == 0,
        })
    }
}

/// Estimate a registry event over uniform walks on the engine's set.
pub fn estimate_event(engine: &PivotEngine, event: &WalkEvent, config: &WalkConfig) -> Result<EstimateReport> {
    let gen = engine.set().set.clone();
    let successes = (0..config.trials)
        .into_par_iter()
        .map(|t| {
            let traj = sample_path(&gen, config, t)?;
            event.holds(engine, &traj).map(u64::from)
        })
        .try_reduce(|| 0, |a, b| Ok(a + b))?;
    Ok(EstimateReport::from_counts(event.name(), config.n_steps, successes, config.trials, config.master_seed))
}

/// Histograms of `#P_N` grouped by the number of slots `N = #Θ`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PivotCountTable {
    /// `N ↦ (count ↦ trials)`.
    pub by_slots: BTreeMap<usize, BTreeMap<usize, u64>>,
    pub trials: u64,
}

impl PivotCountTable {
    fn merge(mut self, other: PivotCountTable) -> PivotCountTable {
        for (n, hist) in other.by_slots {
            let mine = self.by_slots.entry(n).or_default();
            for (c, t) in hist {
                *mine.entry(c).or_default() += t;
            }
        }
        self.trials += other.trials;
        self
    }

    /// Trials with exactly `n_slots` slots.
    pub fn group_size(&self, n_slots: usize) -> u64 {
        self.by_slots.get(&n_slots).map_or(0, |h| h.values().sum())
    }
}

/// Run the pivot machine on every trial and tabulate `#P_N` against `N`.
pub fn pivot_count_table(engine: &PivotEngine, config: &WalkConfig) -> Result<PivotCountTable> {
    let gen = engine.set().set.clone();
    (0..config.trials)
        .into_par_iter()
        .map(|t| {
            let traj = sample_path(&gen, config, t)?;
            let r = engine.run(&traj)?;
            let mut table = PivotCountTable {
                trials: 1,
                ..Default::default()
            };
            table
                .by_slots
                .entry(r.decomposition.slots())
                .or_default()
                .insert(r.pivot_count(), 1);
            Ok(table)
        })
        .try_reduce(PivotCountTable::default, |a, b| Ok(a.merge(b)))
}

/// Pivot counts of walks with exactly `n_slots` slots, by rejection sampling.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConditionedSample {
    pub n_slots: usize,
    pub counts: Vec<usize>,
    pub attempts: u64,
    /// The attempt cap was reached before `config.trials` acceptances.
    pub cap_hit: bool,
}

pub fn sample_conditioned(engine: &PivotEngine, config: &WalkConfig, n_slots: usize, cap: u64) -> Result<ConditionedSample> {
    let gen = engine.set().set.clone();
    let mut counts = Vec::new();
    let mut attempts = 0;
    while (counts.len() as u64) < config.trials && attempts < cap {
        let traj = sample_path(&gen, config, attempts)?;
        attempts += 1;
        let dec = engine.decompose(&traj)?;
        if dec.slots() == n_slots {
            counts.push(engine.run(&traj)?.pivot_count());
        }
    }
    Ok(ConditionedSample {
        n_slots,
        cap_hit: (counts.len() as u64) < config.trials,
        counts,
        attempts,
    })
}

/// Pointwise comparison of an empirical CDF of `#P_N` with `P(ΣXᵢ ≤ x)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DominationReport {
    pub n_slots: usize,
    pub trials: u64,
    /// Largest `F_emp(x) − F_exact(x) − 3·SE(x)`; non-positive when the check holds.
    pub worst_excess: f64,
    pub worst_point: i64,
    pub holds: bool,
}

pub fn domination_check(n_slots: usize, histogram: &BTreeMap<usize, u64>) -> DominationReport {
    let trials: u64 = histogram.values().sum();
    let t = trials.max(1) as f64;
    let mut worst = f64::NEG_INFINITY;
    let mut worst_point = 0;
    let mut cumulative = 0u64;
    for x in 0..=n_slots {
        cumulative += histogram.get(&x).copied().unwrap_or(0);
        let emp = cumulative as f64 / t;
        let exact: f64 = sum_cdf(n_slots, x as i64);
        let se = (exact * (1.0 - exact) / t).sqrt();
        let excess = emp - exact - 3.0 * se;
        if excess > worst {
            worst = excess;
            worst_point = x as i64;
        }
    }
    DominationReport {
        n_slots,
        trials,
        worst_excess: worst,
        worst_point,
        holds: worst <= 1e-12,
    }
}

/// Least-squares slope of `log p` against `n` with a 95% interval half-width
/// (normal approximation); points with `p = 0` are skipped.
pub fn log_slope(points: &[(usize, f64)]) -> Option<(f64, f64)> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(_, p)| *p > 0.0)
        .map(|&(n, p)| (n as f64, p.ln()))
        .collect();
    if pts.len() < 3 {
        return None;
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let resid: f64 = pts.iter().map(|p| (p.1 - my - slope * (p.0 - mx)).powi(2)).sum();
    let se = (resid / (k - 2.0) / sxx).sqrt();
    Some((slope, Z95 * se))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::word::w;

    fn toy() -> Arc<GeneratingSet> {
        Arc::new(GeneratingSet::new(["aa", "ab", "ba", "AA", "BA", "AB"].iter().map(|s| w(s)).collect()).unwrap())
    }

    #[test]
    fn determinism_and_trivial_set() {
        let gen = toy();
        let cfg = WalkConfig::new(42, 50, 1).unwrap();
        let a = sample_path(&gen, &cfg, 3).unwrap();
        let b = sample_path(&gen, &cfg, 3).unwrap();
        assert_eq!(a.step_indices(), b.step_indices());
        assert_ne!(a.step_indices(), sample_path(&gen, &cfg, 4).unwrap().step_indices());
        let e = Arc::new(GeneratingSet::new(vec![ReducedWord::identity()]).unwrap());
        let t = sample_path(&e, &cfg, 0).unwrap();
        assert!((0..=50).all(|j| t.prefix(j).is_identity()));
        assert!(WalkConfig::new(1, 5, 0).is_err());
    }

    #[test]
    fn uniform_marginals() {
        let gen = toy();
        let cfg = WalkConfig::new(7, 100_000, 1).unwrap();
        let steps = sample_indices(gen.len(), &cfg, 0);
        let mut counts = [0f64; 6];
        for s in steps {
            counts[s] += 1.0;
        }
        let expect = 100_000.0 / 6.0;
        let sigma = (100_000.0 * (1.0 / 6.0) * (5.0 / 6.0f64)).sqrt();
        for c in counts {
            assert!((c - expect).abs() < 3.0 * sigma, "{counts:?}");
        }
    }

    #[test]
    fn non_backtracking_exclusion() {
        let walk = NonBacktrackingWalk::uniform(&toy()).unwrap();
        let cfg = WalkConfig::new(11, 100_000, 1).unwrap();
        let steps = walk.sample_indices(&cfg, 0);
        let mut pair = [[0u64; 6]; 6];
        for win in steps.windows(2) {
            assert_ne!(Some(win[1]), walk.excluded_after(win[0]));
            pair[win[0]][win[1]] += 1;
        }
        for (i, row) in pair.iter().enumerate() {
            let total: u64 = row.iter().sum();
            let p = 0.2;
            let sigma = (total as f64 * p * (1.0 - p)).sqrt();
            for (j, &c) in row.iter().enumerate() {
                if Some(j) == walk.excluded_after(i) {
                    assert_eq!(c, 0);
                } else {
                    assert!((c as f64 - total as f64 * p).abs() < 3.0 * sigma + 1.0);
                }
            }
        }

        let two = NonBacktrackingWalk::uniform(&GeneratingSet::new(vec![w("a"), w("A")]).unwrap()).unwrap();
        let steps = two.sample_indices(&WalkConfig::new(3, 40, 1).unwrap(), 0);
        assert!(steps.windows(2).all(|p| p[0] == p[1]));

        assert!(NonBacktrackingWalk::uniform(&GeneratingSet::new(vec![w("a")]).unwrap()).is_err());
        assert!(NonBacktrackingWalk::new(&[(w("a"), rat(1, 2)), (w("b"), rat(0, 1))]).is_err());
    }

    #[test]
    fn exact_moments() {
        let (dist, m) = iid_pivot_distribution();
        assert_eq!(dist.total_mass(), BigRational::one());
        assert_eq!(m.mean, rat(71, 90));
        assert_eq!(m.exp_moment, rat(1188, 1505));
        assert!(m.truncation_error < BigRational::one() / pow10(30));
        assert_eq!(dist.atoms.len(), 65);
    }

    #[test]
    fn closed_form_cdf_matches_convolution() {
        // Depth 64 puts the truncation far below anything a small sum can see.
        let dist = StepDistribution::with_depth(STEP_DEPTH);
        for m in 0..=4 {
            let law = dist.convolve(m);
            for x in -8..=(m as i64) {
                let conv: BigRational = law.range(..=x).map(|(_, p)| p.clone()).sum();
                let exact: BigRational = sum_cdf(m, x);
                let gap = ratio_to_f64(&(conv - &exact)).abs();
                assert!(gap < 1e-40, "m = {m}, x = {x}, gap {gap}");
                let approx: f64 = sum_cdf(m, x);
                assert!((approx - ratio_to_f64(&exact)).abs() < 1e-12);
            }
            assert_eq!(sum_cdf::<BigRational>(m, m as i64), BigRational::one());
        }
    }

    #[test]
    fn upper_tail_matches_closed_form() {
        let tails = upper_tail_exact(12, 3);
        for (m, t) in tails.iter().enumerate() {
            assert_eq!(t.clone(), BigRational::one() - sum_cdf::<BigRational>(m, 2));
        }
    }

    #[test]
    fn markov_bound_holds_exactly() {
        for n in [5, 30, 60] {
            let c = markov_check(n);
            assert!(c.holds, "{c:?}");
            assert!(c.worst_ratio <= 1.0);
        }
    }

    #[test]
    fn bounds_examples() {
        let b = theoretical_bounds(24, 100).unwrap();
        assert_eq!(b.class_bound, rat(4, 99));
        let b1 = theoretical_bounds(1, 10).unwrap();
        assert_eq!(b1.few_pivots, rat(1, 3) * rat(9, 10) + rat(9886, 10000));
        assert_eq!(b1.class_bound, BigRational::one());
        assert!(theoretical_bounds(0, 10).is_err());
        let mut prev = theoretical_bounds(10, 100).unwrap();
        for n in (19..=1000).step_by(9) {
            let b = theoretical_bounds(n, 100).unwrap();
            assert!(b.few_pivots < prev.few_pivots);
            assert!(b.class_bound <= prev.class_bound);
            assert!(b.ball_fraction < prev.ball_fraction);
            prev = b;
        }
    }

    #[test]
    fn estimates_of_constant_events() {
        let gen = toy();
        let cfg = WalkConfig::new(5, 10, 200).unwrap();
        let yes = estimate("always", &gen, &cfg, |_| true).unwrap();
        assert_eq!(yes.p_hat, BigRational::one());
        assert_eq!(yes.ci_high, BigRational::one());
        let no = estimate("never", &gen, &cfg, |_| false).unwrap();
        assert!(no.p_hat.is_zero() && no.ci_low.is_zero());
        assert!(no.ci_high > BigRational::zero());
        let half = estimate("even", &gen, &cfg, |t| t.endpoint().len() % 4 == 0).unwrap();
        assert!(half.ci_low <= half.p_hat && half.p_hat <= half.ci_high);
        let again = estimate("even", &gen, &cfg, |t| t.endpoint().len() % 4 == 0).unwrap();
        assert_eq!(half, again);
    }

    #[test]
    fn slope_of_a_geometric_curve() {
        let pts: Vec<(usize, f64)> = (1..6).map(|n| (10 * n, 0.5f64.powi(n as i32))).collect();
        let (s, hw) = log_slope(&pts).unwrap();
        assert!((s - 0.5f64.ln() / 10.0).abs() < 1e-12);
        assert!(hw < 1e-9);
        assert!(log_slope(&pts[..2]).is_none());
    }
}
