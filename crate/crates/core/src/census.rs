//! Exact lattice-point counts: word-metric balls, return counts, distinct
//! products, growth rates and short-translation censuses.
//!
//! Enumerations that could outgrow memory take a byte budget and check it
//! before each new radius, so a census either completes or fails with a
//! [`Error::Capacity`] naming the largest radius that was finished.

use std::collections::{BTreeMap, HashMap, HashSet};

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::schottky::SchottkySet;
use crate::word::{GeneratingSet, ReducedWord};

/// Default memory budget for enumerations (2 GiB).
pub const DEFAULT_BUDGET_BYTES: u64 = 2 << 30;

/// Rough per-element cost of a stored word: hash-set slot, vector header and allocation.
const ENTRY_OVERHEAD: u64 = 64;

/// Sphere sizes and translation-length histograms of `B_S(n)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BallCensus {
    pub radius: usize,
    /// `|∂B_S(k)|` for `k = 0, …, radius`.
    pub spheres: Vec<u64>,
    /// For each sphere, `τ ↦ number of elements`.
    pub tau_histograms: Vec<BTreeMap<usize, u64>>,
}

impl BallCensus {
    /// `|B_S(k)|`.
    pub fn ball_size(&self, k: usize) -> u64 {
        self.spheres[..=k].iter().sum()
    }

    pub fn total(&self) -> u64 {
        self.ball_size(self.radius)
    }

    /// Number of elements of `B_S(k)` with `τ ≤ bound`.
    pub fn count_tau_at_most(&self, k: usize, bound: &BigRational) -> u64 {
        self.tau_histograms[..=k]
            .iter()
            .flat_map(|h| h.iter())
            .filter(|(&tau, _)| BigRational::from_integer(tau.into()) <= *bound)
            .map(|(_, &c)| c)
            .sum()
    }
}

fn word_cost(w: &ReducedWord) -> u64 {
    ENTRY_OVERHEAD + w.len() as u64
}

/// Exact breadth-first enumeration of `B_S(n)`.
pub fn ball(s: &GeneratingSet, n: usize, budget_bytes: u64) -> Result<BallCensus> {
    let mut visited: HashSet<ReducedWord> = HashSet::from([ReducedWord::identity()]);
    let mut frontier = vec![ReducedWord::identity()];
    let mut census = BallCensus {
        radius: 0,
        spheres: vec![1],
        tau_histograms: vec![BTreeMap::from([(0, 1)])],
    };
    let mut used = ENTRY_OVERHEAD;
    let step_len = s.max_len() as u64;
    for k in 1..=n {
        let frontier_len = frontier.iter().map(|w| w.len() as u64).max().unwrap_or(0);
        let predicted = frontier.len() as u64 * s.len() as u64 * (ENTRY_OVERHEAD + frontier_len + step_len);
        if used.saturating_add(predicted) > budget_bytes {
            return Err(Error::Capacity(format!(
                "ball of radius {k} would exceed the budget of {budget_bytes} bytes; largest completed radius is {}",
                k - 1
            )));
        }
        let candidates: Vec<ReducedWord> = frontier
            .par_iter()
            .flat_map_iter(|w| s.elements().iter().map(move |g| w.multiply(g)))
            .collect();
        let mut sphere = Vec::new();
        for c in candidates {
            if !visited.contains(&c) {
                used += word_cost(&c);
                visited.insert(c.clone());
                sphere.push(c);
            }
        }
        let mut hist = BTreeMap::new();
        for w in &sphere {
            *hist.entry(w.translation_length()).or_insert(0) += 1;
        }
        census.spheres.push(sphere.len() as u64);
        census.tau_histograms.push(hist);
        census.radius = k;
        frontier = sphere;
    }
    Ok(census)
}

/// Closed walks of length `n` at the root of the `degree`-regular tree.
pub fn returns_dp(degree: usize, n: usize) -> Result<BigUint> {
    if degree < 2 || degree % 2 == 1 {
        return Err(Error::Precondition(format!("degree must be even and at least 2, got {degree}")));
    }
    // f[r] = number of walks of the current length ending at distance r.
    let mut f: Vec<BigUint> = vec![BigUint::one()];
    let forward = BigUint::from(degree as u64 - 1);
    let from_root = BigUint::from(degree as u64);
    for _ in 0..n {
        let mut g = vec![BigUint::zero(); f.len() + 1];
        for (r, c) in f.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            if r == 0 {
                g[1] += c * &from_root;
            } else {
                g[r - 1] += c;
                g[r + 1] += c * &forward;
            }
        }
        f = g;
    }
    Ok(f.swap_remove(0))
}

/// Products of `k`-letter sequences over `s` with their multiplicities.
fn product_counts(s: &GeneratingSet, k: usize, budget_bytes: u64) -> Result<HashMap<ReducedWord, u128>> {
    let mut level: HashMap<ReducedWord, u128> = HashMap::from([(ReducedWord::identity(), 1)]);
    for step in 1..=k {
        let predicted = level.len() as u64 * s.len() as u64 * (ENTRY_OVERHEAD + (step * s.max_len()) as u64 + 16);
        if predicted > budget_bytes {
            return Err(Error::Capacity(format!(
                "products of {step} letters would exceed the budget of {budget_bytes} bytes"
            )));
        }
        let mut next: HashMap<ReducedWord, u128> = HashMap::with_capacity(level.len() * s.len());
        for (w, c) in &level {
            for g in s.elements() {
                let e = next.entry(w.multiply(g)).or_insert(0);
                *e = e.checked_add(*c).ok_or_else(|| Error::Capacity("multiplicity overflow".into()))?;
            }
        }
        level = next;
    }
    Ok(level)
}

/// Number of `n`-letter sequences over `s` whose product is trivial, by
/// meeting in the middle.
pub fn returns_exact(s: &GeneratingSet, n: usize, budget_bytes: u64) -> Result<BigUint> {
    if n == 0 {
        return Ok(BigUint::one());
    }
    let left = product_counts(s, n / 2, budget_bytes)?;
    let right = if n % 2 == 0 {
        None
    } else {
        Some(product_counts(s, n - n / 2, budget_bytes)?)
    };
    let right = right.as_ref().unwrap_or(&left);
    let mut total = BigUint::zero();
    for (w, c) in right {
        if let Some(d) = left.get(&w.inverse()) {
            total += BigUint::from(*c) * BigUint::from(*d);
        }
    }
    Ok(total)
}

/// Exhaustive count of the same quantity (oracle for small `n`).
pub fn returns_brute(s: &GeneratingSet, n: usize) -> u64 {
    fn go(s: &GeneratingSet, w: &ReducedWord, left: usize) -> u64 {
        if left == 0 {
            return u64::from(w.is_identity());
        }
        s.elements().iter().map(|g| go(s, &w.multiply(g), left - 1)).sum()
    }
    go(s, &ReducedWord::identity(), n)
}

/// Number of distinct `n`-fold products `a₁⋯aₙ`, by enumeration.
pub fn distinct_products(s: &GeneratingSet, n: usize, budget_bytes: u64) -> Result<u64> {
    let mut level: HashSet<ReducedWord> = HashSet::from([ReducedWord::identity()]);
    for step in 1..=n {
        let predicted = level.len() as u64 * s.len() as u64 * (ENTRY_OVERHEAD + (step * s.max_len()) as u64);
        if predicted > budget_bytes {
            return Err(Error::Capacity(format!(
                "products of {step} letters would exceed the budget of {budget_bytes} bytes; largest completed length is {}",
                step - 1
            )));
        }
        level = level
            .par_iter()
            .flat_map_iter(|w| s.elements().iter().map(move |g| w.multiply(g)))
            .collect();
    }
    Ok(level.len() as u64)
}

/// Whether `basis` freely generates the subgroup it spans.
///
/// The petal graph of `basis` is folded (Stallings); the folded graph has
/// rank `E − V + 1` equal to the rank of the subgroup, and a generating set
/// of a free group of that rank with exactly that many elements is a basis.
pub fn is_free_basis(basis: &[ReducedWord]) -> bool {
    if basis.iter().any(|b| b.is_identity()) {
        return false;
    }
    // Vertex 0 is the base point; every petal adds |b| − 1 interior vertices.
    let mut edges: Vec<(usize, usize, usize)> = Vec::new();
    let mut vertices = 1;
    for b in basis {
        let mut at = 0;
        for (i, l) in b.letters().iter().enumerate() {
            let to = if i + 1 == b.len() {
                0
            } else {
                vertices += 1;
                vertices - 1
            };
            // Store every edge with a positive label.
            if l.sign() > 0 {
                edges.push((at, l.generator(), to));
            } else {
                edges.push((to, l.generator(), at));
            }
            at = to;
        }
    }
    let mut parent: Vec<usize> = (0..vertices).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    loop {
        let mut changed = false;
        let mut out: HashMap<(usize, usize), usize> = HashMap::new();
        let mut inc: HashMap<(usize, usize), usize> = HashMap::new();
        let mut kept: HashSet<(usize, usize, usize)> = HashSet::new();
        for &(u, g, v) in &edges {
            let (u, v) = (find(&mut parent, u), find(&mut parent, v));
            if let Some(&t) = out.get(&(u, g)) {
                let (a, b) = (find(&mut parent, t), v);
                if a != b {
                    parent[a] = b;
                    changed = true;
                }
            } else {
                out.insert((u, g), v);
            }
            if let Some(&t) = inc.get(&(v, g)) {
                let (a, b) = (find(&mut parent, t), u);
                if a != b {
                    parent[a] = b;
                    changed = true;
                }
            } else {
                inc.insert((v, g), u);
            }
            kept.insert((u, g, v));
        }
        edges = kept
            .into_iter()
            .map(|(u, g, v)| (find(&mut parent, u), g, find(&mut parent, v)))
            .collect::<HashSet<_>>()
            .into_iter()
            .collect();
        if !changed {
            break;
        }
    }
    let live: HashSet<usize> = (0..vertices).map(|v| find(&mut parent, v)).collect();
    edges.len() + 1 == live.len() + basis.len()
}

/// `A(n)` from the free-basis formula `Σ_{k ≤ n, k ≡ n (2)} |sphere(k)|`, with
/// `|sphere(0)| = 1` and `|sphere(k)| = 2r(2r − 1)^{k−1}`.
///
/// Requires `s = B ∪ B⁻¹` for a free basis `B` of size `r` of the subgroup it generates.
pub fn distinct_products_free(s: &GeneratingSet, n: usize) -> Result<BigUint> {
    let basis = free_half(s).ok_or_else(|| {
        Error::Unsupported("the set is not the symmetrisation of a free basis".into())
    })?;
    let r = basis.len() as u64;
    let mut total = BigUint::zero();
    for k in (0..=n).rev().step_by(2) {
        total += if k == 0 {
            BigUint::one()
        } else {
            BigUint::from(2 * r) * num_traits::pow(BigUint::from(2 * r - 1), k - 1)
        };
    }
    Ok(total)
}

/// One element from each inverse pair, if `s` is symmetric, free of `e` and
/// a free basis after dropping inverses.
fn free_half(s: &GeneratingSet) -> Option<Vec<ReducedWord>> {
    if !s.is_symmetric() || s.contains_identity() {
        return None;
    }
    let mut half: Vec<ReducedWord> = s.elements().iter().filter(|w| **w < w.inverse()).cloned().collect();
    half.sort();
    is_free_basis(&half).then_some(half)
}

/// `A(n)`: enumeration when it fits the budget, otherwise the free-basis
/// formula when it applies.
pub fn sequence_count_a(s: &GeneratingSet, n: usize, budget_bytes: u64) -> Result<BigUint> {
    match distinct_products(s, n, budget_bytes) {
        Ok(c) => Ok(BigUint::from(c)),
        Err(Error::Capacity(msg)) => distinct_products_free(s, n).map_err(|_| Error::Capacity(msg)),
        Err(e) => Err(e),
    }
}

/// `A(n)` and `B(n)` for a range of lengths.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SequenceCensus {
    #[serde(with = "crate::scalar::text::map")]
    pub a: BTreeMap<usize, BigUint>,
    #[serde(with = "crate::scalar::text::map")]
    pub b: BTreeMap<usize, BigUint>,
}

pub fn sequence_census(s: &GeneratingSet, max_a: usize, max_b: usize, budget_bytes: u64) -> Result<SequenceCensus> {
    let mut out = SequenceCensus::default();
    for n in 0..=max_a {
        out.a.insert(n, sequence_count_a(s, n, budget_bytes)?);
    }
    for n in 0..=max_b {
        out.b.insert(n, returns_exact(s, n, budget_bytes)?);
    }
    Ok(out)
}

/// Proportion of `B_S(n)` with `τ ≤ L·n`.
pub fn short_translation_census(s: &GeneratingSet, n: usize, l: &BigRational, budget_bytes: u64) -> Result<BigRational> {
    let census = ball(s, n, budget_bytes)?;
    Ok(short_translation_from(&census, n, l))
}

/// The same proportion read off an existing census of radius at least `n`.
pub fn short_translation_from(census: &BallCensus, n: usize, l: &BigRational) -> BigRational {
    let bound = l * BigRational::from_integer(n.into());
    BigRational::new(
        BigInt::from(census.count_tau_at_most(n, &bound)),
        BigInt::from(census.ball_size(n)),
    )
}

/// Averaged successive ratios of a count series.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GrowthEstimate {
    /// Mean of the ratios in the window (per step of the series).
    #[serde(with = "crate::scalar::text")]
    pub estimate: BigRational,
    /// `1` for `c(n)/c(n−1)`, `2` for parity-supported series using `c(n)/c(n−2)`.
    pub step: usize,
    /// The raw ratios `(n, c(n)/c(n − step))` in the window.
    #[serde(with = "crate::scalar::text::pairs")]
    pub ratios: Vec<(usize, BigRational)>,
}

/// Estimate the growth ratio from the last `window` ratios of a series.
///
/// A series vanishing at some index of its tail is treated as
/// parity-supported; ratios then compare `n` with `n − 2` on the support.
pub fn growth_rate(series: &BTreeMap<usize, BigUint>, window: usize) -> Result<GrowthEstimate> {
    if window == 0 {
        return Err(Error::Precondition("window must be positive".into()));
    }
    let Some((&last, _)) = series.iter().next_back() else {
        return Err(Error::InsufficientData("empty series".into()));
    };
    let parity = series.range(last.saturating_sub(2 * window)..).any(|(_, c)| c.is_zero());
    let step = if parity { 2 } else { 1 };
    let mut ratios = Vec::with_capacity(window);
    let mut n = last;
    for _ in 0..window {
        let (Some(num), Some(den)) = (series.get(&n), n.checked_sub(step).and_then(|m| series.get(&m))) else {
            return Err(Error::InsufficientData(format!(
                "need {} consecutive entries ending at {last} with step {step}",
                window + 1
            )));
        };
        if den.is_zero() {
            return Err(Error::InsufficientData(format!("zero count at {}", n - step)));
        }
        ratios.push((n, BigRational::new(BigInt::from(num.clone()), BigInt::from(den.clone()))));
        n -= step;
    }
    ratios.reverse();
    let sum: BigRational = ratios.iter().map(|(_, r)| r.clone()).sum();
    Ok(GrowthEstimate {
        estimate: sum / BigRational::from_integer(window.into()),
        step,
        ratios,
    })
}

/// Whether `s₁² ⋯ sₙ²` are pairwise distinct over non-backtracking sequences
/// `(s₁, …, sₙ)` of `S₀` (`s_{i+1} ≠ s_i⁻¹`), together with the number of sequences.
pub fn schottky_sequences_injective(s1: &SchottkySet, n: usize, budget_bytes: u64) -> Result<(bool, u64)> {
    let s0 = s1.s0();
    let m = s1.len();
    let squares: Vec<ReducedWord> = s0.iter().map(|s| s.multiply(s)).collect();
    let count = if n == 0 {
        1
    } else {
        (2 * m as u64) * (2 * m as u64 - 1).pow(n as u32 - 1)
    };
    let per = ENTRY_OVERHEAD + (n * squares.iter().map(|w| w.len()).max().unwrap_or(0)) as u64;
    if count.saturating_mul(per) > budget_bytes {
        return Err(Error::Capacity(format!("{count} sequences exceed the budget of {budget_bytes} bytes")));
    }
    let inverse = |i: usize| if i < m { i + m } else { i - m };
    let mut seen: HashSet<ReducedWord> = HashSet::with_capacity(count as usize);
    let mut level: Vec<(ReducedWord, Option<usize>)> = vec![(ReducedWord::identity(), None)];
    for _ in 0..n {
        let mut next = Vec::with_capacity(level.len() * (2 * m - 1));
        for (w, last) in &level {
            for (i, sq) in squares.iter().enumerate() {
                if Some(inverse(i)) != *last {
                    next.push((w.multiply(sq), Some(i)));
                }
            }
        }
        level = next;
    }
    let mut injective = true;
    for (w, _) in level {
        if !seen.insert(w) {
            injective = false;
        }
    }
    Ok((injective, count))
}
