//! Witnessing and marking predicates evaluated exactly on the Cayley tree,
//! the four-point hyperbolicity defect, and an empirical search for the
//! constants of the fellow-travelling facts.
//!
//! All predicates compare doubled Gromov products against doubled
//! thresholds, so no rounding ever enters a verdict.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Half;
use crate::tree::{NodeId, PathTree};
use crate::word::{Letter, ReducedWord};

/// A metric tree on which Gromov products can be evaluated.
pub trait TreeMetric {
    type Point: Clone + PartialEq + fmt::Debug;

    /// Twice the Gromov product `(y, z)_x`.
    fn gromov2(&self, y: &Self::Point, z: &Self::Point, x: &Self::Point) -> i64;

    fn distance(&self, x: &Self::Point, y: &Self::Point) -> i64;
}

/// The Cayley tree with points given as reduced words.
#[derive(Clone, Copy, Debug, Default)]
pub struct Words;

impl TreeMetric for Words {
    type Point = ReducedWord;

    fn gromov2(&self, y: &ReducedWord, z: &ReducedWord, x: &ReducedWord) -> i64 {
        crate::word::gromov_doubled(y.letters(), z.letters(), x.letters())
    }

    fn distance(&self, x: &ReducedWord, y: &ReducedWord) -> i64 {
        x.distance(y) as i64
    }
}

impl TreeMetric for PathTree {
    type Point = NodeId;

    fn gromov2(&self, y: &NodeId, z: &NodeId, x: &NodeId) -> i64 {
        PathTree::gromov2(self, *y, *z, *x)
    }

    fn distance(&self, x: &NodeId, y: &NodeId) -> i64 {
        PathTree::distance(self, *x, *y)
    }
}

/// The ordered pair of points `[start, end]`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment<P = ReducedWord> {
    pub start: P,
    pub end: P,
}

impl<P> Segment<P> {
    pub fn new(start: P, end: P) -> Self {
        Segment { start, end }
    }
}

/// A nonempty ordered sequence of segments.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WitnessChain<P = ReducedWord> {
    segments: Vec<Segment<P>>,
}

impl<P> WitnessChain<P> {
    pub fn new(segments: Vec<Segment<P>>) -> Result<Self> {
        if segments.is_empty() {
            return Err(Error::Precondition("a witness chain needs at least one segment".into()));
        }
        Ok(WitnessChain { segments })
    }

    pub fn segments(&self) -> &[Segment<P>] {
        &self.segments
    }
}

/// The constant ladder `C ≤ D ≤ E ≤ F` together with the length threshold `L`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeometryParams {
    pub delta: Half,
    pub c: Half,
    pub d: Half,
    pub e: Half,
    pub f: Half,
    pub l: Half,
}

impl GeometryParams {
    /// Tree defaults for a base constant `C`.
    ///
    /// On a tree the witnessing facts hold with `D = 2C`, and the two
    /// concatenation steps at most double the constant each time, which
    /// gives `E = 2D` and `F = 4D`. The length threshold is set to `F`.
    /// Tests confirm by sampling that the searched minima stay below these.
    pub fn tree_defaults(c: Half) -> Self {
        let d = c * 2;
        GeometryParams {
            delta: Half::ZERO,
            c,
            d,
            e: d * 2,
            f: d * 4,
            l: d * 4,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.delta >= Half::ZERO
            && self.c >= Half::ZERO
            && self.c <= self.d
            && self.d <= self.e
            && self.e <= self.f
            && self.l >= self.d;
        if ok {
            Ok(())
        } else {
            Err(Error::Precondition(format!("constants violate C ≤ D ≤ E ≤ F and L ≥ D: {self:?}")))
        }
    }

    /// Whether `K′ > 2L + 5000F`.
    pub fn admits_k_prime(&self, k_prime: u64) -> bool {
        let bound = self.l * 2 + self.f * 5000;
        Half::from_int(k_prime as i64) > bound
    }
}

/// Thickness hook. Every point and segment of a tree is thick.
pub fn is_thick<P>(_segment: &Segment<P>) -> bool {
    true
}

/// Smallest `δ ≥ 0` for which every quadruple of `points` satisfies the
/// Gromov inequality `(x, y)_w ≥ min{(x, z)_w, (y, z)_w} − δ`.
pub fn hyperbolicity_defect(points: &[ReducedWord]) -> Half {
    let n = points.len();
    if n < 4 {
        return Half::ZERO;
    }
    let worst = (0..n)
        .into_par_iter()
        .map(|wi| {
            let base = points[wi].letters();
            let mut table = vec![0i64; n * n];
            for i in 0..n {
                for j in i..n {
                    let g = crate::word::gromov_doubled(points[i].letters(), points[j].letters(), base);
                    table[i * n + j] = g;
                    table[j * n + i] = g;
                }
            }
            let mut worst = 0i64;
            for x in 0..n {
                for y in 0..n {
                    let xy = table[x * n + y];
                    for z in 0..n {
                        let m = table[x * n + z].min(table[y * n + z]);
                        worst = worst.max(m - xy);
                    }
                }
            }
            worst
        })
        .max()
        .unwrap_or(0);
    Half::from_doubled(worst)
}

/// Largest doubled Gromov product among the three condition families of
/// witnessing `[x, y]` by `chain`; witnessing at `D` means this is `< 2D`.
pub fn witnessing_sup<M: TreeMetric>(m: &M, x: &M::Point, y: &M::Point, chain: &[Segment<M::Point>]) -> i64 {
    let n = chain.len();
    let xs = |i: usize| -> &M::Point {
        if i == 0 {
            x
        } else if i == n + 1 {
            y
        } else {
            &chain[i - 1].start
        }
    };
    let ys = |i: usize| -> &M::Point {
        if i == 0 {
            x
        } else if i == n + 1 {
            y
        } else {
            &chain[i - 1].end
        }
    };
    let mut sup = i64::MIN;
    for i in 1..=n {
        sup = sup.max(m.gromov2(xs(i - 1), xs(i + 1), xs(i)));
        sup = sup.max(m.gromov2(ys(i - 1), ys(i + 1), ys(i)));
        sup = sup.max(m.gromov2(ys(i - 1), ys(i), xs(i)));
        sup = sup.max(m.gromov2(xs(i), xs(i + 1), ys(i)));
    }
    sup
}

/// Whether `[x, y]` is `D`-witnessed by `chain` (generic over the tree model).
pub fn witnessed_in<M: TreeMetric>(m: &M, x: &M::Point, y: &M::Point, chain: &[Segment<M::Point>], d: Half) -> bool {
    chain.is_empty() || witnessing_sup(m, x, y, chain) < d.doubled()
}

/// Whether `[x, y]` is `D`-witnessed by the chain, with strict inequalities.
pub fn is_witnessed(x: &ReducedWord, y: &ReducedWord, chain: &WitnessChain, d: Half) -> bool {
    witnessed_in(&Words, x, y, chain.segments(), d)
}

/// Largest doubled product entering the marking conditions, after anchor
/// validation.
///
/// With `fully = false`, `gammas[i] = [x_{i+1}, y_{i+1}]` and
/// `etas[i] = [z_{i+1}, x_{i+1}]` for `i < N`; conditions are the `N`
/// junctions and the `N + 1` witnessing conditions with `x₀ = y₀ = x` and
/// `x_{N+1} = z_{N+1} = y`.
///
/// With `fully = true`, `gammas = (γ₁, …, γ_{N−1})` and
/// `etas = (η₂, …, η_N)`; `x` must be the start of `γ₁` and `y` the end of
/// `η_N`. Conditions are the junctions at `x₂, …, x_{N−1}` and witnessing of
/// `[x_{i−1}, x_i]` by `(γ_{i−1}, η_i)` for `i = 2, …, N`.
pub fn marking_sup<M: TreeMetric>(
    m: &M,
    x: &M::Point,
    y: &M::Point,
    gammas: &[Segment<M::Point>],
    etas: &[Segment<M::Point>],
    fully: bool,
) -> Result<i64> {
    if gammas.len() != etas.len() || gammas.is_empty() {
        return Err(Error::MalformedChain(format!(
            "need equally many gammas and etas (at least one), got {} and {}",
            gammas.len(),
            etas.len()
        )));
    }
    let k = gammas.len();
    let mut sup = i64::MIN;
    if !fully {
        for i in 0..k {
            if gammas[i].start != etas[i].end {
                return Err(Error::MalformedChain(format!("gamma {} and eta {} do not share an anchor", i + 1, i + 1)));
            }
        }
        for i in 0..k {
            sup = sup.max(m.gromov2(&gammas[i].end, &etas[i].start, &gammas[i].start));
        }
        for i in 0..=k {
            let (a, ay) = if i == 0 { (x, x) } else { (&gammas[i - 1].start, &gammas[i - 1].end) };
            let (b, bz) = if i == k { (y, y) } else { (&etas[i].end, &etas[i].start) };
            let chain = [Segment::new(a.clone(), ay.clone()), Segment::new(bz.clone(), b.clone())];
            sup = sup.max(witnessing_sup(m, a, b, &chain));
        }
    } else {
        if &gammas[0].start != x {
            return Err(Error::MalformedChain("x is not the start of the first gamma".into()));
        }
        if &etas[k - 1].end != y {
            return Err(Error::MalformedChain("y is not the end of the last eta".into()));
        }
        for j in 1..k {
            if gammas[j].start != etas[j - 1].end {
                return Err(Error::MalformedChain(format!("anchor {} is not shared by its gamma and eta", j + 1)));
            }
        }
        for j in 1..k {
            sup = sup.max(m.gromov2(&gammas[j].end, &etas[j - 1].start, &gammas[j].start));
        }
        for j in 0..k {
            let (a, b) = (&gammas[j].start, &etas[j].end);
            let chain = [gammas[j].clone(), etas[j].clone()];
            sup = sup.max(witnessing_sup(m, a, b, &chain));
        }
    }
    Ok(sup)
}

/// Whether `[x, y]` is (fully) `D`-marked, generic over the tree model.
pub fn marked_in<M: TreeMetric>(
    m: &M,
    x: &M::Point,
    y: &M::Point,
    gammas: &[Segment<M::Point>],
    etas: &[Segment<M::Point>],
    d: Half,
    fully: bool,
) -> Result<bool> {
    Ok(marking_sup(m, x, y, gammas, etas, fully)? < d.doubled())
}

/// Whether `[x, y]` is (fully) `D`-marked with the given segments.
pub fn is_marked(
    x: &ReducedWord,
    y: &ReducedWord,
    gammas: &[Segment],
    etas: &[Segment],
    d: Half,
    fully: bool,
) -> Result<bool> {
    marked_in(&Words, x, y, gammas, etas, d, fully)
}

/// The fellow-travelling facts whose constants are searched empirically.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum FactId {
    FarSegment,
    OneSegment,
    Concat,
    ConcatUlt,
    PasserBy,
}

impl FactId {
    pub const ALL: [FactId; 5] = [
        FactId::FarSegment,
        FactId::OneSegment,
        FactId::Concat,
        FactId::ConcatUlt,
        FactId::PasserBy,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FactId::FarSegment => "farSegment",
            FactId::OneSegment => "oneSegment",
            FactId::Concat => "concat",
            FactId::ConcatUlt => "concatUlt",
            FactId::PasserBy => "passerBy",
        }
    }

    /// Rank of each sampled point along the backbone, in the order the
    /// point list is consumed by the hypothesis and conclusion checks.
    fn layout(self) -> &'static [usize] {
        match self {
            // x, y, z, x'
            FactId::FarSegment | FactId::OneSegment => &[0, 1, 2, 3],
            // x1, x2, x3, y1, y2, y3, y4, y5
            FactId::Concat => &[0, 4, 6, 1, 2, 3, 4, 5],
            // x1, x2, x3, y1, y2, y3
            FactId::ConcatUlt => &[0, 2, 4, 1, 2, 3],
            // x, y, z, p1, p2
            FactId::PasserBy => &[0, 3, 0, 1, 2],
        }
    }
}

impl fmt::Display for FactId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FactId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        FactId::ALL
            .into_iter()
            .find(|f| f.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Parse(format!("unknown fact {s:?}")))
    }
}

/// Parameters entering a fact's hypotheses.
///
/// `input` is the given constant (`C` for the two segment facts, `D` for
/// `concat`, `E` for `concatUlt`, `F` for `passerBy`); `l` is the length
/// threshold used where the fact requires long segments.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HypothesisParams {
    pub input: Half,
    pub l: Half,
}

/// How sample configurations are drawn.
///
/// Points are placed at sorted random positions along a random reduced
/// backbone whose length is uniform in `[0, max_len]`; each point then
/// leaves the backbone along a random hair of length uniform in
/// `[0, max_hair]`. `Uniform` ignores the backbone and draws independent
/// random words.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "camelCase")]
pub enum ConfigSampler {
    Geodesic { rank: usize, max_len: usize, max_hair: usize },
    Uniform { rank: usize, max_len: usize },
}

impl Default for ConfigSampler {
    fn default() -> Self {
        ConfigSampler::Geodesic {
            rank: 2,
            max_len: 64,
            max_hair: 3,
        }
    }
}

/// A uniformly random reduced word of exactly `len` letters.
pub fn random_reduced_word<R: Rng + ?Sized>(rng: &mut R, rank: usize, len: usize) -> ReducedWord {
    let mut letters: Vec<Letter> = Vec::with_capacity(len);
    while letters.len() < len {
        let l = Letter::from_code(rng.gen_range(0..2 * rank));
        if letters.last() != Some(&l.inverse()) {
            letters.push(l);
        }
    }
    ReducedWord::from_reduced(letters).expect("built reduced")
}

impl ConfigSampler {
    /// Draw points laid out by rank along a common backbone.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, ranks: &[usize]) -> Vec<ReducedWord> {
        match *self {
            ConfigSampler::Uniform { rank, max_len } => ranks
                .iter()
                .map(|_| {
                    let len = rng.gen_range(0..=max_len);
                    random_reduced_word(rng, rank, len)
                })
                .collect(),
            ConfigSampler::Geodesic { rank, max_len, max_hair } => {
                let len = rng.gen_range(0..=max_len);
                let backbone = random_reduced_word(rng, rank, len);
                let slots = ranks.iter().copied().max().map_or(0, |r| r + 1);
                let mut positions: Vec<usize> = (0..slots).map(|_| rng.gen_range(0..=len)).collect();
                positions.sort_unstable();
                ranks
                    .iter()
                    .map(|&r| {
                        let base = ReducedWord::from_reduced(backbone.letters()[..positions[r]].to_vec())
                            .expect("prefix of a reduced word");
                        let hair_len = rng.gen_range(0..=max_hair);
                        base.multiply(&random_reduced_word(rng, rank, hair_len))
                    })
                    .collect()
            }
        }
    }
}

/// Outcome of a constant search.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstantSearchReport {
    pub fact: FactId,
    pub hypothesis_params: HypothesisParams,
    /// Least constant for which every conclusion inequality holds in its
    /// non-strict form; any strictly larger value satisfies the strict form.
    pub minimal_constant: Half,
    pub found: bool,
    pub trials: usize,
    /// Samples that met the hypotheses at the reported constant.
    pub admissible: usize,
    pub seed: u64,
    /// For `concatUlt`, the largest `|(x₁, x₃)_{x₂} − d(x₂, y₂)|` seen among admissible samples.
    pub max_deviation: Option<Half>,
}

const SEARCH_CAP_DOUBLED: i64 = 1 << 20;

fn seg(a: &ReducedWord, b: &ReducedWord) -> Segment {
    Segment::new(a.clone(), b.clone())
}

fn longer(a: &ReducedWord, b: &ReducedWord, l: Half) -> bool {
    2 * a.distance(b) as i64 > l.doubled()
}

/// Evaluate one sample at candidate constant `k` (doubled).
///
/// Returns `None` when the hypotheses fail, otherwise whether the conclusion
/// holds non-strictly.
fn check_sample(fact: FactId, p: &[ReducedWord], hyp: HypothesisParams, k2: i64) -> Option<bool> {
    let m = Words;
    let input2 = hyp.input.doubled();
    let g = |y: &ReducedWord, z: &ReducedWord, x: &ReducedWord| m.gromov2(y, z, x);
    let within = |x: &ReducedWord, y: &ReducedWord, chain: &[Segment], bound2: i64| witnessing_sup(&m, x, y, chain) <= bound2;
    let strictly = |x: &ReducedWord, y: &ReducedWord, chain: &[Segment], bound2: i64| witnessing_sup(&m, x, y, chain) < bound2;
    match fact {
        FactId::FarSegment => {
            let (x, y, z, xp) = (&p[0], &p[1], &p[2], &p[3]);
            let dyz = 2 * y.distance(z) as i64;
            let ok = g(x, z, y) < input2
                && g(y, xp, z) < input2
                && dyz >= 2 * x.distance(y) as i64
                && dyz >= 2 * z.distance(xp) as i64
                && dyz >= 3 * k2;
            ok.then(|| within(x, xp, &[seg(x, y), seg(z, xp)], k2))
        }
        FactId::OneSegment => {
            let (x, y, z, xp) = (&p[0], &p[1], &p[2], &p[3]);
            let ok = g(x, z, y) < input2 && g(x, xp, z) < input2;
            ok.then(|| within(x, xp, &[seg(x, y), seg(z, xp)], k2))
        }
        FactId::Concat => {
            let (x1, x2, x3) = (&p[0], &p[1], &p[2]);
            let (y1, y2, y3, y4, y5) = (&p[3], &p[4], &p[5], &p[6], &p[7]);
            let ok = longer(y1, y2, hyp.l)
                && longer(y3, y4, hyp.l)
                && longer(y4, y5, hyp.l)
                && g(y3, y5, y4) <= input2
                && strictly(x1, x2, &[seg(y1, y2), seg(y3, y4)], input2)
                && strictly(x2, x3, &[seg(y4, y5)], k2);
            ok.then(|| within(x1, x3, &[seg(y1, y2)], k2))
        }
        FactId::ConcatUlt => {
            let (x1, x2, x3) = (&p[0], &p[1], &p[2]);
            let (y1, y2, y3) = (&p[3], &p[4], &p[5]);
            let ok = longer(y1, y2, hyp.l)
                && longer(y2, y3, hyp.l)
                && g(y1, y3, y2) <= input2
                && strictly(x1, x2, &[seg(y1, y2)], input2)
                && strictly(x2, x3, &[seg(y2, y3)], input2);
            ok.then(|| {
                let dev = (g(x1, x3, x2) - 2 * x2.distance(y2) as i64).abs();
                within(x1, x3, &[seg(y1, y2)], k2) && within(x1, x3, &[seg(y2, y3)], k2) && dev <= k2
            })
        }
        FactId::PasserBy => {
            let (x, y, z, p1, p2) = (&p[0], &p[1], &p[2], &p[3], &p[4]);
            let ok = longer(p1, p2, hyp.l)
                && strictly(x, y, &[seg(p1, p2)], input2)
                && g(x, z, y) >= 2 * p1.distance(y) as i64 - input2;
            ok.then(|| within(z, y, &[seg(p1, p2)], k2))
        }
    }
}

/// Search for the least constant making a fact's conclusion hold on sampled
/// configurations that satisfy its hypotheses.
///
/// The search doubles the candidate until every admissible sample passes,
/// then bisects on the half-integer grid. If the cap is reached, the report
/// carries the cap with `found = false`.
pub fn minimal_witness_constant(
    sampler: &ConfigSampler,
    fact: FactId,
    hyp: HypothesisParams,
    trials: usize,
    seed: u64,
) -> Result<ConstantSearchReport> {
    if trials == 0 {
        return Err(Error::Precondition("trials must be at least 1".into()));
    }
    let ranks = fact.layout();
    let samples: Vec<Vec<ReducedWord>> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(crate::walk::mix_seed(seed, t as u64));
            sampler.sample(&mut rng, ranks)
        })
        .collect();
    let passes = |k2: i64| -> bool {
        samples
            .par_iter()
            .all(|s| check_sample(fact, s, hyp, k2).unwrap_or(true))
    };
    let (found, k2) = if passes(0) {
        (true, 0)
    } else {
        let mut hi = 1i64;
        while hi <= SEARCH_CAP_DOUBLED && !passes(hi) {
            hi *= 2;
        }
        if hi > SEARCH_CAP_DOUBLED {
            (false, SEARCH_CAP_DOUBLED)
        } else {
            let mut lo = hi / 2;
            // Invariant: passes(hi) and (lo == 0 or !passes(lo)); passes(0) is false.
            while hi - lo > 1 {
                let mid = (lo + hi) / 2;
                if passes(mid) {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            (true, hi)
        }
    };
    let admissible: Vec<&Vec<ReducedWord>> = samples
        .iter()
        .filter(|s| check_sample(fact, s, hyp, k2).is_some())
        .collect();
    let max_deviation = (fact == FactId::ConcatUlt).then(|| {
        let worst = admissible
            .iter()
            .map(|p| (Words.gromov2(&p[0], &p[2], &p[1]) - 2 * p[1].distance(&p[4]) as i64).abs())
            .max()
            .unwrap_or(0);
        Half::from_doubled(worst)
    });
    Ok(ConstantSearchReport {
        fact,
        hypothesis_params: hyp,
        minimal_constant: Half::from_doubled(k2),
        found,
        trials,
        admissible: admissible.len(),
        seed,
        max_deviation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::word::w;

    fn s(a: &str, b: &str) -> Segment {
        Segment::new(w(a), w(b))
    }

    #[test]
    fn defect_examples() {
        assert_eq!(hyperbolicity_defect(&[w("e"), w("a"), w("b"), w("ab")]), Half::ZERO);
        assert_eq!(hyperbolicity_defect(&[w("e"), w("a"), w("b")]), Half::ZERO);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let points: Vec<ReducedWord> = (0..200)
            .map(|_| {
                let len = rng.gen_range(0..=50);
                random_reduced_word(&mut rng, 2, len)
            })
            .collect();
        assert_eq!(hyperbolicity_defect(&points), Half::ZERO);
    }

    #[test]
    fn witnessing_examples() {
        let one = Half::from_int(1);
        let forward = WitnessChain::new(vec![s("a", "aaa")]).unwrap();
        assert!(is_witnessed(&w("e"), &w("aaaa"), &forward, one));
        let reversed = WitnessChain::new(vec![s("aaa", "a")]).unwrap();
        assert!(!is_witnessed(&w("e"), &w("aaaa"), &reversed, one));
        // The offending product is (e, a)_{a³} = 2.
        assert_eq!(Words.gromov2(&w("e"), &w("a"), &w("aaa")), 4);
        let trivial = WitnessChain::new(vec![s("e", "e")]).unwrap();
        assert!(is_witnessed(&w("e"), &w("e"), &trivial, one));
        assert!(WitnessChain::<ReducedWord>::new(vec![]).is_err());
    }

    #[test]
    fn marking_examples() {
        let one = Half::from_int(1);
        let err = is_marked(&w("e"), &w("aaaaaaaa"), &[s("a", "aaa")], &[s("a", "aa")], one, false);
        assert!(matches!(err, Err(Error::MalformedChain(_))));
        let ok = is_marked(&w("e"), &w("aaaaaa"), &[s("aa", "aaaa")], &[s("a", "aa")], one, false).unwrap();
        assert!(ok);
    }

    #[test]
    fn marked_concatenation_instance() {
        // Two fully marked pieces along the geodesic from e to a^12.
        let d = Half::from_int(1);
        let g1 = vec![s("e", "a"), s("aaa", "aaaa")];
        let e1 = vec![s("aa", "aaa"), s("aaaaa", "aaaaaa")];
        assert!(is_marked(&w("e"), &w("aaaaaa"), &g1, &e1, d, true).unwrap());
        let g2 = vec![s("aaaaaa", "aaaaaaa"), s("aaaaaaaaa", "aaaaaaaaaa")];
        let e2 = vec![s("aaaaaaaa", "aaaaaaaaa"), s("aaaaaaaaaaa", "aaaaaaaaaaaa")];
        assert!(is_marked(&w("aaaaaa"), &w("aaaaaaaaaaaa"), &g2, &e2, d, true).unwrap());
        let gammas: Vec<Segment> = g1.iter().chain(&g2).cloned().collect();
        let etas: Vec<Segment> = e1.iter().chain(&e2).cloned().collect();
        assert!(is_marked(&w("e"), &w("aaaaaaaaaaaa"), &gammas, &etas, d, true).unwrap());
    }

    #[test]
    fn fully_marked_validates_endpoints() {
        let d = Half::from_int(1);
        let r = is_marked(&w("a"), &w("aaa"), &[s("e", "a")], &[s("aa", "aaa")], d, true);
        assert!(matches!(r, Err(Error::MalformedChain(_))));
        let r = is_marked(&w("e"), &w("aa"), &[s("e", "a")], &[s("aa", "aaa")], d, true);
        assert!(matches!(r, Err(Error::MalformedChain(_))));
    }

    #[test]
    fn constant_search_one_segment() {
        let hyp = HypothesisParams {
            input: Half::from_int(1),
            l: Half::from_int(4),
        };
        let report = minimal_witness_constant(&ConfigSampler::default(), FactId::OneSegment, hyp, 10_000, 3).unwrap();
        assert!(report.found);
        assert!(report.admissible > 0);
        assert!(report.minimal_constant <= Half::from_int(3), "{report:?}");
    }

    #[test]
    fn constant_search_collinear_far_segment() {
        let hyp = HypothesisParams {
            input: Half::ZERO,
            l: Half::ZERO,
        };
        let collinear = ConfigSampler::Geodesic {
            rank: 2,
            max_len: 64,
            max_hair: 0,
        };
        // With C = 0 the strict hypotheses are unsatisfiable, so every
        // sample is vacuous; with C = 1/2 all samples are collinear.
        let report = minimal_witness_constant(&collinear, FactId::FarSegment, hyp, 2_000, 5).unwrap();
        assert_eq!(report.minimal_constant, Half::ZERO);
        let hyp = HypothesisParams {
            input: Half::from_doubled(1),
            ..hyp
        };
        let report = minimal_witness_constant(&collinear, FactId::FarSegment, hyp, 2_000, 5).unwrap();
        assert_eq!(report.minimal_constant, Half::ZERO);
        assert!(report.admissible > 0);
    }

    #[test]
    fn constant_search_concat_ult_reports_deviation() {
        let hyp = HypothesisParams {
            input: Half::from_int(2),
            l: Half::from_int(2),
        };
        let report = minimal_witness_constant(&ConfigSampler::default(), FactId::ConcatUlt, hyp, 5_000, 9).unwrap();
        assert!(report.found);
        let dev = report.max_deviation.unwrap();
        assert!(dev <= report.minimal_constant);
    }

    #[test]
    fn tree_defaults_dominate_searched_constants() {
        let k = Half::from_int(3);
        let p = GeometryParams::tree_defaults(k);
        p.validate().unwrap();
        let sampler = ConfigSampler::default();
        let cases = [
            (FactId::OneSegment, k, p.d),
            (FactId::FarSegment, k, p.d),
            (FactId::Concat, p.d, p.e),
            (FactId::ConcatUlt, p.e, p.f),
        ];
        for (fact, input, bound) in cases {
            let hyp = HypothesisParams { input, l: p.l };
            let r = minimal_witness_constant(&sampler, fact, hyp, 4_000, 11).unwrap();
            assert!(r.found && r.minimal_constant < bound, "{fact}: {r:?} vs {bound}");
        }
    }

    #[test]
    fn k_prime_gate() {
        let p = GeometryParams::tree_defaults(Half::from_int(1));
        assert!(!p.admits_k_prime(100));
        assert!(p.admits_k_prime(2 * 8 + 5000 * 8 + 1));
    }
}
