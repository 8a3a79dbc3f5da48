//! Pivotal times of a trajectory.
//!
//! A trajectory `(g₁, …, gₙ)` is split into Schottky slots (pairs of
//! consecutive steps that are both squares of Schottky elements) and the
//! words in between. A state machine then walks through the slots, keeping a
//! set `P_k` of slots at which the path makes definite progress along
//! `[o, wₙ o]`. The steps `g_{2ϑ(i)−1}` for `i ∈ P_N` are the pivotal times.
//! Each of them can be resampled inside an explicit allowed set without
//! changing any later decision.
//!
//! Every geometric test runs on a [`PathTree`] holding all prefixes of the
//! trajectory, so Gromov products cost a few ancestor queries.
//!
//! Criterion (B) asks for a chain of earlier slots `i(1) < ⋯ < i(M)` whose
//! Schottky segments fully mark the path up to the latest one. The marking
//! conditions only involve consecutive entries, so the lexicographically
//! best chain is found by dynamic programming over the current slot set.
//! The edge predicates do not depend on the stage and are cached across
//! stages.

use std::collections::BTreeMap;
use std::sync::Arc;

use num_rational::BigRational;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{marked_in, witnessing_sup, GeometryParams, Segment};
use crate::scalar::Half;
use crate::schottky::PopulatedGeneratingSet;
use crate::tree::{NodeId, PathTree};
use crate::word::{lcp, product_lengths, reduce, GeneratingSet, Letter, ReducedWord};

/// Largest number of Schottky slots handled with a dense predicate cache.
pub const MAX_SLOTS: usize = 1 << 13;

/// A finite step sequence over a generating set, with every prefix product
/// stored as a node of a shared [`PathTree`].
#[derive(Clone, Debug)]
pub struct Trajectory {
    gen: Arc<GeneratingSet>,
    steps: Vec<u32>,
    tree: PathTree,
    prefixes: Vec<NodeId>,
}

impl Trajectory {
    /// Build from generator indices into `gen`.
    pub fn new(gen: Arc<GeneratingSet>, steps: Vec<usize>) -> Result<Self> {
        if let Some(&bad) = steps.iter().find(|&&i| i >= gen.len()) {
            return Err(Error::Precondition(format!("step index {bad} outside a set of size {}", gen.len())));
        }
        let rank = gen.min_rank().max(2);
        let mut traj = Trajectory {
            gen,
            steps: steps.into_iter().map(|i| i as u32).collect(),
            tree: PathTree::new(rank),
            prefixes: vec![PathTree::ROOT],
        };
        traj.extend_prefixes(0);
        Ok(traj)
    }

    /// Build from step words, each of which must belong to `gen`.
    pub fn from_words(gen: Arc<GeneratingSet>, words: &[ReducedWord]) -> Result<Self> {
        let steps = words
            .iter()
            .map(|w| gen.index_of(w).ok_or_else(|| Error::Precondition(format!("step {w} is not in the generating set"))))
            .collect::<Result<Vec<_>>>()?;
        Trajectory::new(gen, steps)
    }

    fn extend_prefixes(&mut self, from: usize) {
        self.prefixes.truncate(from + 1);
        for j in from..self.steps.len() {
            let word = self.gen.get(self.steps[j] as usize).letters();
            let prev = self.prefixes[j];
            let next = self.tree.walk(prev, word);
            self.prefixes.push(next);
        }
    }

    pub fn gen_set(&self) -> &Arc<GeneratingSet> {
        &self.gen
    }

    /// Number of steps `n`.
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Generator index of step `g_j` (`1 ≤ j ≤ n`).
    pub fn step_index(&self, j: usize) -> usize {
        self.steps[j - 1] as usize
    }

    /// The step `g_j` (`1 ≤ j ≤ n`).
    pub fn step(&self, j: usize) -> &ReducedWord {
        self.gen.get(self.step_index(j))
    }

    pub fn step_indices(&self) -> Vec<usize> {
        self.steps.iter().map(|&i| i as usize).collect()
    }

    pub fn tree(&self) -> &PathTree {
        &self.tree
    }

    /// The tree node of `w_j o` for `0 ≤ j ≤ n`.
    pub fn node(&self, j: usize) -> NodeId {
        self.prefixes[j]
    }

    /// The prefix product `w_j = g₁ ⋯ g_j`.
    pub fn prefix(&self, j: usize) -> ReducedWord {
        self.tree.word(self.prefixes[j])
    }

    /// `wₙ`.
    pub fn endpoint(&self) -> ReducedWord {
        self.prefix(self.len())
    }

    /// Replace steps `(time, generator index)`; prefixes before the earliest
    /// replaced time are reused.
    pub fn with_substitutions(&self, subs: &[(usize, usize)]) -> Result<Trajectory> {
        let mut out = self.clone();
        let mut earliest = self.len();
        for &(time, idx) in subs {
            if time == 0 || time > self.len() {
                return Err(Error::Precondition(format!("time {time} outside 1..={}", self.len())));
            }
            if idx >= self.gen.len() {
                return Err(Error::Precondition(format!("generator index {idx} out of range")));
            }
            if out.steps[time - 1] as usize != idx {
                out.steps[time - 1] = idx as u32;
                earliest = earliest.min(time - 1);
            }
        }
        if earliest < self.len() {
            out.extend_prefixes(earliest);
        }
        Ok(out)
    }
}

/// The Schottky slots `Θ = {ϑ(1) < ⋯ < ϑ(N)}` and the square roots
/// `a_i, b_i ∈ S₀` of the steps `g_{2ϑ(i)−1}, g_{2ϑ(i)}`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ThetaDecomposition {
    pub n: usize,
    /// `ϑ(1), …, ϑ(N)`, one-based.
    pub theta: Vec<usize>,
    /// Indices into `S₀` of `a_1, …, a_N`.
    pub a: Vec<usize>,
    /// Indices into `S₀` of `b_1, …, b_N`.
    pub b: Vec<usize>,
}

impl ThetaDecomposition {
    pub fn slots(&self) -> usize {
        self.theta.len()
    }

    /// Step index of `w_{2ϑ(k)−2}` for `1 ≤ k ≤ N + 1`, with `ϑ(N+1)` read as giving `wₙ`.
    pub fn pre_index(&self, k: usize) -> usize {
        if k > self.theta.len() {
            self.n
        } else {
            2 * self.theta[k - 1] - 2
        }
    }

    /// The words `w₀, …, w_N` between Schottky slots.
    pub fn gap_words(&self, traj: &Trajectory) -> Vec<ReducedWord> {
        let mut out = Vec::with_capacity(self.theta.len() + 1);
        let mut start = 0;
        for k in 1..=self.theta.len() + 1 {
            let stop = self.pre_index(k);
            let rel = traj.tree().relative_prefix(traj.node(start), traj.node(stop), usize::MAX);
            out.push(ReducedWord::from_reduced(rel).expect("tree paths are reduced"));
            start = stop + 2;
        }
        out
    }
}

/// `(k, P_k, z_k)` after stage `k`; slot numbers are one-based.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PivotState {
    pub k: usize,
    pub p: Vec<usize>,
    pub z: NodeId,
}

/// How a stage was decided.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum StageOutcome {
    CriterionA,
    /// Criterion (B) succeeded with this chain of slots.
    CriterionB(Vec<usize>),
    Reset,
}

/// Constants used by the state machine.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PivotParams {
    /// Schottky constant `K`.
    pub k: Half,
    /// Marking constant `D(K)`.
    pub d: Half,
    /// Schottky length `K′`.
    pub k_prime: u64,
}

impl PivotParams {
    /// `K` and `K′` from the Schottky set, and `D = 2K` from the tree defaults.
    pub fn for_set(set: &PopulatedGeneratingSet) -> Self {
        let sp = set.s1().params();
        PivotParams {
            k: sp.k,
            d: GeometryParams::tree_defaults(sp.k).d,
            k_prime: sp.k_prime,
        }
    }
}

/// Tree nodes attached to slot `k`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
struct SlotPoints {
    /// `w_{2ϑ(k)−2} o`
    pre: Vec<NodeId>,
    /// `w_{2ϑ(k)−2} a_k o`
    mid: Vec<NodeId>,
    /// `w_{2ϑ(k)−1} o`
    post: Vec<NodeId>,
    /// `w_{2ϑ(k)} o`
    end: Vec<NodeId>,
    /// `w_{2ϑ(k+1)−2} o`
    next: Vec<NodeId>,
}

/// Output of [`PivotEngine::run`]; node ids refer to the trajectory's tree.
#[derive(Clone, Debug)]
pub struct PivotResult {
    pub decomposition: ThetaDecomposition,
    /// States for `k = 0, …, N`.
    pub trace: Vec<PivotState>,
    /// Outcomes for `k = 1, …, N`.
    pub outcomes: Vec<StageOutcome>,
    /// `P*ₙ = {2ϑ(i) − 1 : i ∈ P_N}`.
    pub pivotal_times: Vec<usize>,
    points: SlotPoints,
}

impl PivotResult {
    /// `P_N` as one-based slot numbers.
    pub fn final_slots(&self) -> &[usize] {
        &self.trace.last().expect("trace starts with P₀").p
    }

    pub fn pivot_count(&self) -> usize {
        self.pivotal_times.len()
    }

    /// Slot number `ι` with `2ϑ(ι) − 1 = time`, if `time` is pivotal.
    pub fn slot_of_time(&self, time: usize) -> Option<usize> {
        self.pivotal_times
            .iter()
            .position(|&t| t == time)
            .map(|i| self.final_slots()[i])
    }
}

/// Summary of a run with points rendered as words.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PivotReport {
    pub n: usize,
    pub theta: Vec<usize>,
    #[serde(rename = "P_trace")]
    pub p_trace: Vec<Vec<usize>>,
    pub z_trace: Vec<ReducedWord>,
    pub pivotal_times: Vec<usize>,
    pub allowed_sizes: Vec<usize>,
    #[serde(rename = "D_f")]
    pub d_f: u64,
    #[serde(rename = "D_b")]
    pub d_b: u64,
    #[serde(rename = "D_t")]
    pub d_t: u64,
    pub side: Side,
    pub in_scope: bool,
}

/// Which block of pivotal times is resampled in the class decomposition.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Front,
    Back,
}

/// The sums `D_f`, `D_b`, `D_t` and the checks attached to them.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassStats {
    pub n: usize,
    /// `m = #P*ₙ`.
    pub m: usize,
    pub d_f: u64,
    pub d_b: u64,
    pub d_t: u64,
    pub side: Side,
    /// `n > 25`, `5m ≥ n` and `m ≥ ⌊n/12⌋`.
    pub in_scope: bool,
    /// `d(o, wₙ o)`.
    pub displacement: u64,
    /// `|d(o, wₙ o) − D_t| < K′n/1000`.
    pub displacement_close: bool,
    /// `min(D_f, D_b) ≤ D_t/2 − K′n/20`.
    pub smaller_side_bound: bool,
}

/// Result of the exhaustive two-slot substitution scan.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HarnessReport {
    /// Pivot ordinals `k < k′`.
    pub k: usize,
    pub k_prime_ordinal: usize,
    pub v: ReducedWord,
    pub excluded: Vec<ReducedWord>,
    pub excluded_prime: Vec<ReducedWord>,
    /// Pairs scanned outside the exclusion sets.
    pub pairs: u64,
    /// Threshold `K′n/12`.
    #[serde(with = "crate::scalar::text")]
    pub threshold: BigRational,
    pub min_translation_length: usize,
    /// Non-excluded substitutions whose product translates less than the threshold.
    pub violations: Vec<(ReducedWord, ReducedWord, usize)>,
}

impl HarnessReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty() && self.excluded.len() <= 2 && self.excluded_prime.len() <= 2
    }
}

/// Cached edge predicates on slot pairs.
struct EdgeCache {
    n: usize,
    e1: Vec<u8>,
    e2: Vec<u8>,
    junction: Vec<u8>,
}

impl EdgeCache {
    fn new(n: usize) -> Self {
        EdgeCache {
            n,
            e1: vec![0; n * n],
            e2: vec![0; n * n],
            junction: vec![0; n],
        }
    }
}

fn cached(slot: &mut u8, eval: impl FnOnce() -> bool) -> bool {
    if *slot == 0 {
        *slot = if eval() { 2 } else { 1 };
    }
    *slot == 2
}

/// The pivot state machine for one nicely populated generating set.
#[derive(Clone, Debug)]
pub struct PivotEngine {
    set: Arc<PopulatedGeneratingSet>,
    params: PivotParams,
    s0: Vec<ReducedWord>,
    square_index: Vec<usize>,
    inverse: Vec<usize>,
}

impl PivotEngine {
    pub fn new(set: Arc<PopulatedGeneratingSet>, params: PivotParams) -> Result<Self> {
        if params.d < params.k {
            return Err(Error::Precondition(format!("D = {} must be at least K = {}", params.d, params.k)));
        }
        let s0 = set.s1().s0();
        let m = set.s1().len();
        let square_index = s0
            .iter()
            .map(|s| set.set.index_of(&s.multiply(s)).expect("squares belong to the set"))
            .collect();
        let inverse = (0..2 * m).map(|i| if i < m { i + m } else { i - m }).collect();
        Ok(PivotEngine {
            set,
            params,
            s0,
            square_index,
            inverse,
        })
    }

    /// Engine with [`PivotParams::for_set`].
    pub fn with_defaults(set: Arc<PopulatedGeneratingSet>) -> Result<Self> {
        let params = PivotParams::for_set(&set);
        PivotEngine::new(set, params)
    }

    pub fn params(&self) -> PivotParams {
        self.params
    }

    pub fn set(&self) -> &Arc<PopulatedGeneratingSet> {
        &self.set
    }

    /// `S₀ = S₁ ∪ S₁⁻¹`.
    pub fn s0(&self) -> &[ReducedWord] {
        &self.s0
    }

    /// Generator index of `s²` for `s = S₀[i]`.
    pub fn square_index(&self, i: usize) -> usize {
        self.square_index[i]
    }

    /// Index in `S₀` of the inverse of `S₀[i]`.
    pub fn inverse_index(&self, i: usize) -> usize {
        self.inverse[i]
    }

    fn k2(&self) -> i64 {
        self.params.k.doubled()
    }

    fn d2(&self) -> i64 {
        self.params.d.doubled()
    }

    fn k0(&self) -> usize {
        self.params.k.ceil().max(0) as usize
    }

    fn check_traj(&self, traj: &Trajectory) -> Result<()> {
        if Arc::ptr_eq(traj.gen_set(), &self.set.set) || **traj.gen_set() == *self.set.set {
            Ok(())
        } else {
            Err(Error::Precondition("the trajectory uses a different generating set".into()))
        }
    }

    /// The Schottky slots of a trajectory.
    pub fn decompose(&self, traj: &Trajectory) -> Result<ThetaDecomposition> {
        self.check_traj(traj)?;
        let n = traj.len();
        let mut out = ThetaDecomposition {
            n,
            theta: Vec::new(),
            a: Vec::new(),
            b: Vec::new(),
        };
        for i in 1..=n / 2 {
            let ra = self.set.sqrt_index(traj.step_index(2 * i - 1));
            let rb = self.set.sqrt_index(traj.step_index(2 * i));
            if let (Some(a), Some(b)) = (ra, rb) {
                out.theta.push(i);
                out.a.push(a);
                out.b.push(b);
            }
        }
        Ok(out)
    }

    fn slot_points(&self, traj: &Trajectory, dec: &ThetaDecomposition) -> SlotPoints {
        let tree = traj.tree();
        let nslots = dec.slots();
        let mut pts = SlotPoints::default();
        for k in 1..=nslots {
            let pre = traj.node(dec.pre_index(k));
            let post = traj.node(dec.pre_index(k) + 1);
            let a_len = self.s0[dec.a[k - 1]].len();
            pts.pre.push(pre);
            pts.mid.push(tree.along(pre, post, a_len));
            pts.post.push(post);
            pts.end.push(traj.node(dec.pre_index(k) + 2));
            pts.next.push(traj.node(dec.pre_index(k + 1)));
        }
        pts
    }

    /// Run the state machine over all slots.
    pub fn run(&self, traj: &Trajectory) -> Result<PivotResult> {
        let dec = self.decompose(traj)?;
        let nslots = dec.slots();
        if nslots > MAX_SLOTS {
            return Err(Error::Capacity(format!("{nslots} Schottky slots exceed the limit of {MAX_SLOTS}")));
        }
        let pts = self.slot_points(traj, &dec);
        let tree = traj.tree();
        let (k2, d2) = (self.k2(), self.d2());
        let mut cache = EdgeCache::new(nslots);
        let mut p: Vec<usize> = Vec::new();
        let mut z = PathTree::ROOT;
        let mut trace = vec![PivotState {
            k: 0,
            p: Vec::new(),
            z,
        }];
        let mut outcomes = Vec::with_capacity(nslots);

        for q in 0..nslots {
            let cond_a = dec.a[q] != self.inverse[dec.b[q]]
                && tree.gromov2(z, pts.mid[q], pts.pre[q]) < k2
                && tree.gromov2(z, pts.post[q], pts.pre[q]) < k2
                && tree.gromov2(pts.post[q], pts.next[q], pts.end[q]) < k2;
            if cond_a {
                p.push(q);
                z = pts.post[q];
                outcomes.push(StageOutcome::CriterionA);
            } else {
                match self.criterion_b(tree, &pts, &mut cache, &p, pts.next[q], k2, d2) {
                    Some(seq) => {
                        let first = seq[0];
                        let last = *seq.last().expect("chains have length at least two");
                        p.retain(|&i| i <= first);
                        z = pts.mid[last];
                        outcomes.push(StageOutcome::CriterionB(seq.iter().map(|&i| i + 1).collect()));
                    }
                    None => {
                        p.clear();
                        z = PathTree::ROOT;
                        outcomes.push(StageOutcome::Reset);
                    }
                }
            }
            trace.push(PivotState {
                k: q + 1,
                p: p.iter().map(|&i| i + 1).collect(),
                z,
            });
        }
        let pivotal_times = p.iter().map(|&i| 2 * dec.theta[i] - 1).collect();
        Ok(PivotResult {
            decomposition: dec,
            trace,
            outcomes,
            pivotal_times,
            points: pts,
        })
    }

    /// The lexicographically largest chain for Criterion (B), as zero-based slots.
    #[allow(clippy::too_many_arguments)]
    fn criterion_b(
        &self,
        tree: &PathTree,
        pts: &SlotPoints,
        cache: &mut EdgeCache,
        p: &[usize],
        next: NodeId,
        k2: i64,
        d2: i64,
    ) -> Option<Vec<usize>> {
        let len = p.len();
        if len < 2 {
            return None;
        }
        let n = cache.n;
        // best[pos] = (length of the best chain starting at p[pos], successor position).
        let mut best: Vec<Option<(usize, Option<usize>)>> = vec![None; len];
        for pos in (0..len).rev() {
            let q = p[pos];
            let mut cand = (tree.gromov2(pts.mid[q], next, pts.post[q]) < k2).then_some((1, None));
            let junction = cached(&mut cache.junction[q], || {
                tree.gromov2(pts.post[q], pts.pre[q], pts.mid[q]) < d2
            });
            if junction {
                for r in (pos + 1..len).rev() {
                    let Some((l, _)) = best[r] else { continue };
                    if cand.is_some_and(|(cl, _)| l < cl) {
                        continue;
                    }
                    let rr = p[r];
                    let ok = cached(&mut cache.e2[q * n + rr], || {
                        let chain = [Segment::new(pts.mid[q], pts.post[q]), Segment::new(pts.pre[rr], pts.mid[rr])];
                        witnessing_sup(tree, &pts.mid[q], &pts.mid[rr], &chain) < d2
                    });
                    if ok {
                        cand = Some((1 + l, Some(r)));
                    }
                }
            }
            best[pos] = cand;
        }
        for pos1 in (0..len - 1).rev() {
            let i1 = p[pos1];
            let mut choice: Option<(usize, usize)> = None;
            for r in (pos1 + 1..len).rev() {
                let Some((l, _)) = best[r] else { continue };
                if choice.is_some_and(|(cl, _)| l < cl) {
                    continue;
                }
                let rr = p[r];
                let ok = cached(&mut cache.e1[i1 * n + rr], || {
                    let chain = [Segment::new(pts.post[i1], pts.end[i1]), Segment::new(pts.pre[rr], pts.mid[rr])];
                    witnessing_sup(tree, &pts.post[i1], &pts.mid[rr], &chain) < d2
                });
                if ok {
                    choice = Some((1 + l, r));
                }
            }
            if let Some((_, mut r)) = choice {
                let mut seq = vec![i1, p[r]];
                while let Some((_, Some(nx))) = best[r] {
                    seq.push(p[nx]);
                    r = nx;
                }
                return Some(seq);
            }
        }
        None
    }

    /// First `k₀` letters of `w_{2ϑ(k)−2}⁻¹ z_{k−1}` (stage `k`, one-based).
    fn relative_z(&self, traj: &Trajectory, result: &PivotResult, k: usize) -> Vec<Letter> {
        let z = result.trace[k - 1].z;
        traj.tree().relative_prefix(result.points.pre[k - 1], z, self.k0())
    }

    fn power_prefix(&self, i: usize, t: usize) -> Vec<Letter> {
        let s = self.s0[i].letters();
        s.iter().cycle().take(t * s.len()).copied().collect()
    }

    /// Whether `a = S₀[i]` satisfies `(u, a o)_o < K`, `(u, a² o)_o < K` for `u` a `k₀`-prefix.
    fn passes_z_test(&self, u: &[Letter], i: usize) -> bool {
        let k0 = self.k0();
        let a = self.s0[i].letters();
        let l1 = lcp(u, a);
        let l2 = if l1 == a.len() { a.len() + lcp(&u[a.len().min(u.len())..], a) } else { l1 };
        l1 < k0 && l2 < k0
    }

    /// The allowed set `S̃′_k` at stage `k` (one-based), as sorted indices into `S₀`.
    pub fn allowed_at_stage(&self, traj: &Trajectory, result: &PivotResult, k: usize) -> Result<Vec<usize>> {
        let nslots = result.decomposition.slots();
        if k == 0 || k > nslots {
            return Err(Error::Precondition(format!("stage {k} outside 1..={nslots}")));
        }
        let u = self.relative_z(traj, result, k);
        let b_inv = self.inverse[result.decomposition.b[k - 1]];
        Ok((0..self.s0.len())
            .filter(|&i| i != b_inv && self.passes_z_test(&u, i))
            .collect())
    }

    /// The allowed set `S̃_j` at a pivotal time `j`.
    pub fn allowed_pivots(&self, traj: &Trajectory, result: &PivotResult, time: usize) -> Result<Vec<usize>> {
        let slot = result
            .slot_of_time(time)
            .ok_or_else(|| Error::Precondition(format!("time {time} is not pivotal")))?;
        self.allowed_at_stage(traj, result, slot)
    }

    /// Number of pairs `(a_k, b_k) ∈ S₀²` fulfilling Criterion (A) with the
    /// rest of the history fixed.
    pub fn criterion_a_count(&self, traj: &Trajectory, result: &PivotResult, k: usize) -> Result<u64> {
        let nslots = result.decomposition.slots();
        if k == 0 || k > nslots {
            return Err(Error::Precondition(format!("stage {k} outside 1..={nslots}")));
        }
        let k0 = self.k0();
        let u = self.relative_z(traj, result, k);
        let gap = traj
            .tree()
            .relative_prefix(result.points.end[k - 1], result.points.next[k - 1], k0);
        let z_ok: Vec<bool> = (0..self.s0.len()).map(|i| self.passes_z_test(&u, i)).collect();
        let z_count = z_ok.iter().filter(|&&x| x).count() as u64;
        let mut total = 0u64;
        for b in 0..self.s0.len() {
            let b_inv_sq = self.power_prefix(self.inverse[b], 2);
            if lcp(&b_inv_sq, &gap) >= k0 {
                continue;
            }
            let excluded = u64::from(z_ok[self.inverse[b]]);
            total += z_count - excluded;
        }
        Ok(total)
    }

    /// Replace `a_i` at pivotal times; `subs` maps times to indices into `S₀`.
    pub fn pivot(&self, traj: &Trajectory, result: &PivotResult, subs: &BTreeMap<usize, usize>) -> Result<Trajectory> {
        let mut changes = Vec::with_capacity(subs.len());
        for (&time, &s) in subs {
            let allowed = self.allowed_pivots(traj, result, time)?;
            if allowed.binary_search(&s).is_err() {
                return Err(Error::Precondition(format!(
                    "{} is not an allowed substitution at time {time}",
                    self.s0.get(s).map(|w| w.to_string()).unwrap_or_else(|| format!("index {s}"))
                )));
            }
            changes.push((time, self.square_index[s]));
        }
        traj.with_substitutions(&changes)
    }

    /// `D_f`, `D_b`, `D_t` and the side rule.
    pub fn class_stats(&self, traj: &Trajectory, result: &PivotResult) -> ClassStats {
        let tree = traj.tree();
        let n = traj.len();
        let times = &result.pivotal_times;
        let m = times.len();
        let q = n / 12;
        let kp = self.params.k_prime;
        let term = |l: usize| -> u64 {
            let prev = if l == 0 { 0 } else { times[l - 1] };
            tree.distance(traj.node(prev), traj.node(times[l] - 1)) as u64 + 2 * kp
        };
        let tail = if m == 0 { 0 } else { tree.distance(traj.node(times[m - 1]), traj.node(n)) as u64 };
        let d_t: u64 = (0..m).map(term).sum::<u64>() + if m == 0 { tree.depth(traj.node(n)) as u64 } else { tail };
        let d_f: u64 = (0..q.min(m)).map(term).sum();
        let d_b: u64 = (m.saturating_sub(q)..m).map(term).sum::<u64>() + tail;
        let displacement = tree.depth(traj.node(n)) as u64;
        let in_scope = n > 25 && 5 * m >= n && m >= q;
        let nn = n as u128;
        let kp128 = kp as u128;
        let gap = displacement.abs_diff(d_t) as u128;
        ClassStats {
            n,
            m,
            d_f,
            d_b,
            d_t,
            side: if d_f <= d_b { Side::Front } else { Side::Back },
            in_scope,
            displacement,
            displacement_close: 1000 * gap < kp128 * nn,
            smaller_side_bound: 20 * d_f.min(d_b) as i128 <= 10 * d_t as i128 - (kp128 * nn) as i128,
        }
    }

    /// Exhaustive scan of substitutions at the `k`-th and `k′`-th pivotal
    /// times, all other steps held fixed.
    pub fn translation_harness(
        &self,
        traj: &Trajectory,
        result: &PivotResult,
        k: usize,
        k_prime_ordinal: usize,
    ) -> Result<HarnessReport> {
        let stats = self.class_stats(traj, result);
        let n = traj.len();
        if !stats.in_scope {
            return Err(Error::Precondition(format!(
                "the trajectory is out of scope: n = {n}, {} pivotal times",
                stats.m
            )));
        }
        if stats.side != Side::Front {
            return Err(Error::Precondition("D_f > D_b; the mirrored side applies".into()));
        }
        if !(1 <= k && k < k_prime_ordinal && k_prime_ordinal <= n / 12) {
            return Err(Error::Precondition(format!(
                "need 1 ≤ k < k′ ≤ ⌊n/12⌋, got k = {k}, k′ = {k_prime_ordinal}, n = {n}"
            )));
        }
        let tree = traj.tree();
        let ik = result.pivotal_times[k - 1];
        let ikp = result.pivotal_times[k_prime_ordinal - 1];
        let rel = |from: usize, to: usize| tree.relative_prefix(traj.node(from), traj.node(to), usize::MAX);
        let head = rel(0, ik - 1);
        let middle = rel(ik, ikp - 1);
        let tail = rel(ikp, n);
        let v = reduce(tail.iter().chain(head.iter()).copied());
        let v_inv = v.inverse();
        let k0 = self.k0();
        let slot_k = result.slot_of_time(ik).expect("pivotal");
        let slot_kp = result.slot_of_time(ikp).expect("pivotal");
        let allowed_k = self.allowed_at_stage(traj, result, slot_k)?;
        let allowed_kp = self.allowed_at_stage(traj, result, slot_kp)?;
        let squares: Vec<Vec<Letter>> = self.s0.iter().map(|s| s.multiply(s).into_letters()).collect();
        let excluded: Vec<usize> = allowed_k
            .iter()
            .copied()
            .filter(|&g| lcp(v_inv.letters(), &squares[g]) >= k0)
            .collect();
        let excluded_prime: Vec<usize> = allowed_kp
            .iter()
            .copied()
            .filter(|&g| lcp(self.s0[self.inverse[g]].letters(), v.letters()) >= k0)
            .collect();
        let threshold = BigRational::new((self.params.k_prime as i64 * n as i64).into(), 12.into());
        let mut pairs = 0u64;
        let mut min_tau = usize::MAX;
        let mut violations = Vec::new();
        for &h in allowed_k.iter().filter(|h| !excluded.contains(h)) {
            for &hp in allowed_kp.iter().filter(|h| !excluded_prime.contains(h)) {
                pairs += 1;
                let (_, tau) = product_lengths(&[&head, &squares[h], &middle, &squares[hp], &tail]);
                min_tau = min_tau.min(tau);
                if (12 * tau as u64) < self.params.k_prime * n as u64 {
                    violations.push((self.s0[h].clone(), self.s0[hp].clone(), tau));
                }
            }
        }
        Ok(HarnessReport {
            k,
            k_prime_ordinal,
            v,
            excluded: excluded.iter().map(|&i| self.s0[i].clone()).collect(),
            excluded_prime: excluded_prime.iter().map(|&i| self.s0[i].clone()).collect(),
            pairs,
            threshold,
            min_translation_length: if pairs == 0 { 0 } else { min_tau },
            violations,
        })
    }

    /// Check the marking of `[o, wₙ o]` by the Schottky segments of the final
    /// pivotal slots, `γ_t = [w_{2ϑ(ι_t)−1} o, w_{2ϑ(ι_t)} o]` and
    /// `η_t = [w_{2ϑ(ι_t)−2} o, w_{2ϑ(ι_t)−1} o]`, at constant `d`.
    pub fn extremal_marking(&self, traj: &Trajectory, result: &PivotResult, d: Half) -> Result<bool> {
        let slots = result.final_slots();
        if slots.is_empty() {
            return Ok(true);
        }
        let pts = &result.points;
        let gammas: Vec<Segment<NodeId>> = slots.iter().map(|&s| Segment::new(pts.post[s - 1], pts.end[s - 1])).collect();
        let etas: Vec<Segment<NodeId>> = slots.iter().map(|&s| Segment::new(pts.pre[s - 1], pts.post[s - 1])).collect();
        marked_in(traj.tree(), &PathTree::ROOT, &traj.node(traj.len()), &gammas, &etas, d, false)
    }

    /// Largest doubled product `(w_i o, w_k o)_{w_j o}` over `i ≤ j ≤ k` in `P*ₙ ∪ {0, n}`.
    pub fn alignment_defect(&self, traj: &Trajectory, result: &PivotResult) -> i64 {
        let mut idx = vec![0usize];
        idx.extend(result.pivotal_times.iter().copied());
        idx.push(traj.len());
        let tree = traj.tree();
        let mut worst = 0;
        for a in 0..idx.len() {
            for b in a..idx.len() {
                for c in b..idx.len() {
                    let g = tree.gromov2(traj.node(idx[a]), traj.node(idx[c]), traj.node(idx[b]));
                    worst = worst.max(g);
                }
            }
        }
        worst
    }

    /// JSON-friendly summary of a run.
    pub fn report(&self, traj: &Trajectory, result: &PivotResult) -> Result<PivotReport> {
        let stats = self.class_stats(traj, result);
        let allowed_sizes = result
            .pivotal_times
            .iter()
            .map(|&t| self.allowed_pivots(traj, result, t).map(|a| a.len()))
            .collect::<Result<Vec<_>>>()?;
        Ok(PivotReport {
            n: traj.len(),
            theta: result.decomposition.theta.clone(),
            p_trace: result.trace.iter().map(|s| s.p.clone()).collect(),
            z_trace: result.trace.iter().map(|s| traj.tree().word(s.z)).collect(),
            pivotal_times: result.pivotal_times.clone(),
            allowed_sizes,
            d_f: stats.d_f,
            d_b: stats.d_b,
            d_t: stats.d_t,
            side: stats.side,
            in_scope: stats.in_scope,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schottky::{BuildOptions, PopulatedGeneratingSet, SchottkyParams, SchottkySet};
    use crate::word::w;

    /// S₁ = {aaaa, bbbb}-style toy: certified set with the identity and `a, b` added.
    fn small_set() -> Arc<PopulatedGeneratingSet> {
        let core = crate::schottky::construct_schottky(4, 8).unwrap();
        let ratio = BigRational::new(1.into(), 2.into());
        Arc::new(PopulatedGeneratingSet::assemble(&[w("a"), w("b")], core, ratio, 0).unwrap())
    }

    fn sq(set: &PopulatedGeneratingSet, s: &ReducedWord) -> ReducedWord {
        let t = s.multiply(s);
        assert!(set.set.index_of(&t).is_some());
        t
    }

    #[test]
    fn decomposition_examples() {
        let set = small_set();
        let eng = PivotEngine::with_defaults(set.clone()).unwrap();
        let s = set.s1().elements()[0].clone();
        let t = set.s1().elements()[1].clone();
        let traj = Trajectory::from_words(set.set.clone(), &[sq(&set, &s), sq(&set, &t)]).unwrap();
        let dec = eng.decompose(&traj).unwrap();
        assert_eq!(dec.theta, vec![1]);
        assert_eq!(eng.s0()[dec.a[0]], s);
        assert_eq!(eng.s0()[dec.b[0]], t);
        let gaps = dec.gap_words(&traj);
        assert_eq!(gaps, vec![ReducedWord::identity(), ReducedWord::identity()]);

        let traj = Trajectory::from_words(set.set.clone(), &[sq(&set, &s), w("a")]).unwrap();
        let dec = eng.decompose(&traj).unwrap();
        assert!(dec.theta.is_empty());
        assert_eq!(dec.gap_words(&traj), vec![s.multiply(&s).multiply(&w("a"))]);

        let steps = [sq(&set, &s), sq(&set, &t), sq(&set, &s), sq(&set, &t)];
        let traj = Trajectory::from_words(set.set.clone(), &steps).unwrap();
        assert_eq!(eng.decompose(&traj).unwrap().theta, vec![1, 2]);
    }

    #[test]
    fn run_examples() {
        let set = small_set();
        let eng = PivotEngine::with_defaults(set.clone()).unwrap();
        let s = set.s1().elements()[0].clone();
        let t = set.s1().elements()[1].clone();

        let traj = Trajectory::from_words(set.set.clone(), &[sq(&set, &s), sq(&set, &t)]).unwrap();
        let r = eng.run(&traj).unwrap();
        assert_eq!(r.final_slots(), &[1]);
        assert_eq!(r.pivotal_times, vec![1]);
        assert_eq!(traj.tree().word(r.trace[1].z), traj.prefix(1));

        let words = [sq(&set, &s), sq(&set, &t), sq(&set, &t.inverse()), ReducedWord::identity()];
        let traj = Trajectory::from_words(set.set.clone(), &words).unwrap();
        let r = eng.run(&traj).unwrap();
        assert_eq!(r.decomposition.theta, vec![1]);
        assert!(r.final_slots().is_empty());

        let traj = Trajectory::from_words(set.set.clone(), &[sq(&set, &s), sq(&set, &s.inverse())]).unwrap();
        let r = eng.run(&traj).unwrap();
        assert!(r.final_slots().is_empty());
        assert_eq!(r.outcomes, vec![StageOutcome::Reset]);
    }

    #[test]
    fn trivial_surroundings_exclude_only_the_inverse() {
        let set = small_set();
        let eng = PivotEngine::with_defaults(set.clone()).unwrap();
        let s = set.s1().elements()[0].clone();
        let t = set.s1().elements()[1].clone();
        let traj = Trajectory::from_words(set.set.clone(), &[sq(&set, &s), sq(&set, &t)]).unwrap();
        let r = eng.run(&traj).unwrap();
        let allowed = eng.allowed_pivots(&traj, &r, 1).unwrap();
        assert_eq!(allowed.len(), eng.s0().len() - 1);
        assert!(!allowed.contains(&eng.s0().iter().position(|x| *x == t.inverse()).unwrap()));
        assert!(eng.allowed_pivots(&traj, &r, 2).is_err());
    }

    #[test]
    fn identity_substitution_and_prefix_reuse() {
        let set = small_set();
        let eng = PivotEngine::with_defaults(set.clone()).unwrap();
        let s1 = set.s1().elements();
        let steps: Vec<ReducedWord> = (0..8).map(|i| sq(&set, &s1[i % 3])).collect();
        let traj = Trajectory::from_words(set.set.clone(), &steps).unwrap();
        let r = eng.run(&traj).unwrap();
        assert!(!r.pivotal_times.is_empty());
        let last = *r.pivotal_times.last().unwrap();
        let same: BTreeMap<usize, usize> = [(last, r.decomposition.a[r.slot_of_time(last).unwrap() - 1])].into();
        let again = eng.pivot(&traj, &r, &same).unwrap();
        assert_eq!(again.step_indices(), traj.step_indices());
        let allowed = eng.allowed_pivots(&traj, &r, last).unwrap();
        let other = *allowed.iter().find(|&&x| x != same[&last]).unwrap();
        let moved = eng.pivot(&traj, &r, &[(last, other)].into()).unwrap();
        for j in 0..last {
            assert_eq!(moved.prefix(j), traj.prefix(j));
        }
        assert_ne!(moved.prefix(last), traj.prefix(last));
        let forbidden = (0..eng.s0().len()).find(|x| !allowed.contains(x)).unwrap();
        assert!(eng.pivot(&traj, &r, &[(last, forbidden)].into()).is_err());
    }

    #[test]
    fn class_stats_on_an_all_schottky_path() {
        let set = small_set();
        let eng = PivotEngine::with_defaults(set.clone()).unwrap();
        let s1 = set.s1().elements();
        // Alternate two elements that never cancel: every slot is pivotal.
        let (x, y) = (s1[0].clone(), s1[3].clone());
        let steps: Vec<ReducedWord> = (0..30).map(|i| if i % 2 == 0 { sq(&set, &x) } else { sq(&set, &y) }).collect();
        let traj = Trajectory::from_words(set.set.clone(), &steps).unwrap();
        let r = eng.run(&traj).unwrap();
        let kp = set.s1().params().k_prime;
        let stats = eng.class_stats(&traj, &r);
        let m = r.pivot_count() as u64;
        assert_eq!(stats.m as u64, m);
        // Pivotal times are the odd steps: 2K′ for the first term, 4K′ for the
        // fourteen others and a 2K′ tail.
        assert_eq!(stats.d_t, 60 * kp);
        assert_eq!(stats.displacement, 30 * 2 * kp);
        assert!(stats.in_scope);

        let short = Trajectory::from_words(set.set.clone(), &steps[..20]).unwrap();
        let r = eng.run(&short).unwrap();
        assert!(!eng.class_stats(&short, &r).in_scope);
    }

    #[test]
    fn front_side_on_an_alternating_path() {
        let set = small_set();
        let eng = PivotEngine::with_defaults(set.clone()).unwrap();
        let s1 = set.s1().elements();
        let steps: Vec<ReducedWord> = (0..36).map(|i| sq(&set, &s1[if i % 2 == 0 { 0 } else { 3 }])).collect();
        let traj = Trajectory::from_words(set.set.clone(), &steps).unwrap();
        let r = eng.run(&traj).unwrap();
        let stats = eng.class_stats(&traj, &r);
        let kp = set.s1().params().k_prime;
        // q = 3: the first term has no preceding gap, the back block adds the tail.
        assert_eq!(stats.d_f, 2 * kp + 2 * 4 * kp);
        assert_eq!(stats.d_b, 3 * 4 * kp + 2 * kp);
        assert_eq!(stats.side, Side::Front);
    }

    #[test]
    fn params_and_set_mismatch() {
        let set = small_set();
        let low = PivotParams {
            k: Half::from_int(5),
            d: Half::from_int(2),
            k_prime: 8,
        };
        assert!(PivotEngine::new(set.clone(), low).is_err());
        let other = Arc::new(
            PopulatedGeneratingSet::assemble(
                &[],
                SchottkySet::certify(vec![w("aa"), w("bb")], SchottkyParams::new(Half::from_int(3), 2).unwrap())
                    .unwrap(),
                BigRational::new(1.into(), 2.into()),
                0,
            )
            .unwrap(),
        );
        let eng = PivotEngine::with_defaults(set).unwrap();
        let traj = Trajectory::new(other.set.clone(), vec![0, 1]).unwrap();
        assert!(eng.run(&traj).is_err());
        let _ = BuildOptions::default();
    }
}
