//! Schottky sets in the Cayley tree: exact certification, construction from
//! powers of the basis, and the nicely populated generating sets built from
//! their squares.
//!
//! # Certification
//!
//! Candidates must be cyclically reduced, so every power `s^i` is the prefix
//! of length `i·|s|` of the periodic ray `s^∞` and Gromov products at `o` are
//! common-prefix lengths. With `k₀ = ⌈K⌉`:
//!
//! * (5) and (6) say the prefixes `σ_s = s^∞[..k₀]` (resp. of `s⁻¹`) are distinct.
//! * (7) says `s₁^∞` and `(s₂⁻¹)^∞` share fewer than `k₀` letters.
//! * (3) says `0.9995·K′ < |s| ≤ K′`.
//! * (1) and (2) reduce to a finite constraint problem, described next.
//!
//! Fix `y`. The `k₀`-prefix of `reduce(s^i y)` either equals `σ_s` (once
//! enough of `s^i` survives the cancellation against `y`) or it has one of
//! the *transient types* `(s, c, m)`. Here `c = i|s| − m` letters of `y` are
//! cancelled and `m < k₀` letters of `s^∞` survive. A transient type forces
//! `y[..c] = R_s[..c]` with `R_s = (s⁻¹)^∞`, `p[..m] = s^∞[..m]` and
//! `p[m..] = y[c..c+k₀−m]`. When `m > 0` it also forces `p[m] ≠ R_s[c]`.
//! Property (1) fails exactly when three distinct elements reach a common
//! prefix `p` under a common `y`. Two transient types of `s ≠ t` can only
//! coexist when `min(c_s, c_t) ≤ lcp(R_s, R_t)`. The largest cancellation can
//! be shortened by whole periods without changing `p`, which bounds every
//! `c` by `max_t lcp(R_s, R_t) + k₀ + |s|`. Each pair and triple of types
//! is then decided by union-find plus a small backtracking search for `y`.

use std::collections::HashMap;
use std::sync::Arc;

use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::GeometryParams;
use crate::scalar::Half;
use crate::word::{GeneratingSet, Letter, ReducedWord, DEFAULT_LENGTH_CAP};

/// Largest number of basis sign patterns `n` accepted by the constructor (`2ⁿ` elements).
pub const MAX_PATTERN_BITS: u32 = 20;

/// Largest set the exhaustive checker is asked to certify.
pub const MAX_CERTIFIED_SIZE: usize = 1 << 13;

/// Sets larger than this are flagged as infeasible for exact censuses.
pub const CENSUS_FEASIBLE_SIZE: usize = 4096;

/// `(K, K′)`; thickness is automatic in the tree.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchottkyParams {
    #[serde(rename = "K")]
    pub k: Half,
    #[serde(rename = "K_prime")]
    pub k_prime: u64,
}

impl SchottkyParams {
    pub fn new(k: Half, k_prime: u64) -> Result<Self> {
        if k < Half::from_int(1) || k_prime < 1 {
            return Err(Error::Precondition(format!("need K ≥ 1 and K′ ≥ 1, got K = {k}, K′ = {k_prime}")));
        }
        Ok(SchottkyParams { k, k_prime })
    }

    /// `⌈K⌉`: on a tree every Gromov product is an integer, so `(·) ≥ K` iff `(·) ≥ ⌈K⌉`.
    pub fn k0(&self) -> usize {
        self.k.ceil().max(1) as usize
    }
}

/// Verdict for one of the seven properties.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PropertyVerdict {
    pub property: u8,
    pub holds: bool,
    /// Largest number of elements simultaneously close to one point, for
    /// the counting properties (1), (2), (5), (6).
    pub multiplicity: Option<usize>,
    pub counterexample: Option<String>,
}

/// Per-property certification outcome.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchottkyReport {
    pub params: SchottkyParams,
    pub properties: Vec<PropertyVerdict>,
}

impl SchottkyReport {
    pub fn certified(&self) -> bool {
        self.properties.iter().all(|p| p.holds)
    }

    pub fn property(&self, number: u8) -> &PropertyVerdict {
        &self.properties[(number - 1) as usize]
    }

    pub fn failing(&self) -> Vec<u8> {
        self.properties.iter().filter(|p| !p.holds).map(|p| p.property).collect()
    }
}

/// A Schottky candidate together with its parameters and certification report.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SchottkySet {
    elements: Vec<ReducedWord>,
    params: SchottkyParams,
    report: SchottkyReport,
}

#[derive(Serialize, Deserialize)]
struct SchottkyJson {
    elements: Vec<ReducedWord>,
    #[serde(rename = "K")]
    k: Half,
    #[serde(rename = "K_prime")]
    k_prime: u64,
}

impl Serialize for SchottkySet {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        SchottkyJson {
            elements: self.elements.clone(),
            k: self.params.k,
            k_prime: self.params.k_prime,
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for SchottkySet {
    /// Deserialisation re-runs the checker, so a loaded set always carries a fresh report.
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let raw = SchottkyJson::deserialize(deserializer)?;
        let params = SchottkyParams::new(raw.k, raw.k_prime).map_err(serde::de::Error::custom)?;
        SchottkySet::certify(raw.elements, params).map_err(serde::de::Error::custom)
    }
}

impl SchottkySet {
    /// Run the checker and keep its report, whatever the verdict.
    pub fn certify(elements: Vec<ReducedWord>, params: SchottkyParams) -> Result<Self> {
        let report = check_schottky(&elements, params)?;
        Ok(SchottkySet {
            elements,
            params,
            report,
        })
    }

    pub fn elements(&self) -> &[ReducedWord] {
        &self.elements
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn params(&self) -> SchottkyParams {
        self.params
    }

    pub fn report(&self) -> &SchottkyReport {
        &self.report
    }

    pub fn is_certified(&self) -> bool {
        self.report.certified()
    }

    /// `S₀ = S₁ ∪ S₁⁻¹`, indexed so that `i < #S₁` is `s_i` and `i ≥ #S₁` is `s_{i−#S₁}⁻¹`.
    pub fn s0(&self) -> Vec<ReducedWord> {
        let mut out = self.elements.clone();
        out.extend(self.elements.iter().map(|s| s.inverse()));
        out
    }

    /// Re-certify the sub-family at `indices`, recomputing the least passing `K`.
    pub fn restrict(&self, indices: &[usize]) -> Result<SchottkySet> {
        let mut elements = Vec::with_capacity(indices.len());
        for &i in indices {
            let s = self
                .elements
                .get(i)
                .ok_or_else(|| Error::Precondition(format!("index {i} outside the Schottky set")))?;
            elements.push(s.clone());
        }
        certify_with_least_k(elements, self.params.k_prime)
    }
}

// ---------------------------------------------------------------------------
// Periodic rays and the constraint solver.

fn ray(word: &[Letter], j: usize) -> Letter {
    word[j % word.len()]
}

/// Common-prefix length of two periodic rays, capped at `cap`.
fn ray_lcp(u: &[Letter], v: &[Letter], cap: usize) -> usize {
    (0..cap).take_while(|&j| ray(u, j) == ray(v, j)).count()
}

/// Union-find over the letters of `y` (indices `0..y_len`) and `p`
/// (indices `y_len..y_len + k0`), with constants and exclusions.
struct Csp {
    y_len: usize,
    k0: usize,
    parent: Vec<usize>,
    konst: Vec<Option<Letter>>,
    neq: Vec<(usize, Letter)>,
    conflict: bool,
}

impl Csp {
    fn new(y_len: usize, k0: usize) -> Self {
        let n = y_len + k0;
        Csp {
            y_len,
            k0,
            parent: (0..n).collect(),
            konst: vec![None; n],
            neq: Vec::new(),
            conflict: false,
        }
    }

    fn find(&mut self, mut v: usize) -> usize {
        while self.parent[v] != v {
            self.parent[v] = self.parent[self.parent[v]];
            v = self.parent[v];
        }
        v
    }

    fn set(&mut self, v: usize, l: Letter) {
        let r = self.find(v);
        match self.konst[r] {
            None => self.konst[r] = Some(l),
            Some(x) if x != l => self.conflict = true,
            _ => {}
        }
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        match (self.konst[ra], self.konst[rb]) {
            (Some(x), Some(y)) if x != y => self.conflict = true,
            (None, Some(y)) => self.konst[ra] = Some(y),
            _ => {}
        }
        self.parent[rb] = ra;
    }

    fn p(&self, j: usize) -> usize {
        self.y_len + j
    }

    fn add_type(&mut self, fwd: &[Letter], inv: &[Letter], t: &TransientType) {
        for j in 0..t.c {
            self.set(j, ray(inv, j));
        }
        for j in 0..t.m {
            let pj = self.p(j);
            self.set(pj, ray(fwd, j));
        }
        for j in t.m..self.k0 {
            let pj = self.p(j);
            self.union(pj, t.c + j - t.m);
        }
        if t.m > 0 {
            let pm = self.p(t.m);
            self.neq.push((pm, ray(inv, t.c)));
        }
    }

    fn fix_p(&mut self, sigma: &[Letter]) {
        for (j, &l) in sigma.iter().enumerate() {
            let pj = self.p(j);
            self.set(pj, l);
        }
    }

    /// Find a reduced `y` (and the induced `p`) meeting every constraint.
    fn solve(&mut self, degree: usize) -> Option<(Vec<Letter>, Vec<Letter>)> {
        if self.conflict {
            return None;
        }
        let n = self.y_len + self.k0;
        let roots: Vec<usize> = (0..n).map(|v| self.find(v)).collect();
        let mut excluded: HashMap<usize, Vec<Letter>> = HashMap::new();
        for &(v, l) in &self.neq {
            let r = roots[v];
            if self.konst[r] == Some(l) {
                return None;
            }
            excluded.entry(r).or_default().push(l);
        }
        let mut value: Vec<Option<Letter>> = (0..n).map(|v| self.konst[roots[v]]).collect();
        let mut assigned: Vec<Option<Letter>> = self.konst.clone();
        // Depth-first over positions of y; `choice[j]` is the next letter code to try.
        let y_len = self.y_len;
        let mut owner: Vec<bool> = vec![false; y_len];
        let mut choice: Vec<usize> = vec![0; y_len];
        let mut j = 0usize;
        let letters: Vec<Letter> = (0..degree).map(Letter::from_code).collect();
        'outer: while j < y_len {
            let r = roots[j];
            if !owner[j] && assigned[r].is_some() {
                let l = assigned[r].unwrap();
                if j > 0 && value_at(&assigned, &roots, j - 1) == Some(l.inverse()) {
                    // Backtrack.
                    loop {
                        if j == 0 {
                            return None;
                        }
                        j -= 1;
                        if owner[j] {
                            assigned[roots[j]] = None;
                            owner[j] = false;
                            continue 'outer;
                        }
                    }
                }
                j += 1;
                continue;
            }
            // Free class, first seen here (or being retried).
            let mut placed = false;
            while choice[j] < degree {
                let l = letters[choice[j]];
                choice[j] += 1;
                if excluded.get(&r).is_some_and(|ex| ex.contains(&l)) {
                    continue;
                }
                if j > 0 && value_at(&assigned, &roots, j - 1) == Some(l.inverse()) {
                    continue;
                }
                assigned[r] = Some(l);
                owner[j] = true;
                placed = true;
                break;
            }
            if placed {
                j += 1;
                continue;
            }
            choice[j] = 0;
            // Exhausted: step back to the most recent owner position.
            loop {
                if j == 0 {
                    return None;
                }
                j -= 1;
                if owner[j] {
                    assigned[roots[j]] = None;
                    owner[j] = false;
                    continue 'outer;
                }
            }
        }
        for v in 0..n {
            value[v] = assigned[roots[v]].or(value[v]);
        }
        let y: Vec<Letter> = value[..y_len].iter().map(|l| l.expect("all y letters assigned")).collect();
        let p: Vec<Letter> = value[y_len..]
            .iter()
            .map(|l| l.expect("every p letter is tied to y or fixed"))
            .collect();
        Some((y, p))
    }
}

fn value_at(assigned: &[Option<Letter>], roots: &[usize], j: usize) -> Option<Letter> {
    assigned[roots[j]]
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct TransientType {
    s: usize,
    c: usize,
    m: usize,
}

impl TransientType {
    fn reach(&self, k0: usize) -> usize {
        self.c + k0 - self.m
    }
}

struct Family<'a> {
    fwd: &'a [Vec<Letter>],
    inv: &'a [Vec<Letter>],
    k0: usize,
    degree: usize,
}

impl Family<'_> {
    fn solve(&self, types: &[TransientType], sigma: Option<&[Letter]>) -> Option<(Vec<Letter>, Vec<Letter>)> {
        let y_len = types.iter().map(|t| t.reach(self.k0)).max().unwrap_or(0);
        let mut csp = Csp::new(y_len, self.k0);
        for t in types {
            csp.add_type(&self.fwd[t.s], &self.inv[t.s], t);
            if csp.conflict {
                return None;
            }
        }
        if let Some(sig) = sigma {
            csp.fix_p(sig);
        }
        csp.solve(self.degree)
    }

    fn sigma(&self, s: usize) -> Vec<Letter> {
        (0..self.k0).map(|j| ray(&self.fwd[s], j)).collect()
    }
}

/// Outcome of the prefix-counting property for one orientation.
struct PrefVerdict {
    holds: bool,
    multiplicity: usize,
    counterexample: Option<String>,
    /// `(y, p, elements)` for a violation.
    #[cfg_attr(not(test), allow(dead_code))]
    witness: Option<(ReducedWord, ReducedWord, [usize; 3])>,
}

fn word_of(letters: Vec<Letter>) -> ReducedWord {
    ReducedWord::from_reduced(letters).expect("solver produces reduced words")
}

/// Decide "at most two elements reach a common `k₀`-prefix of `reduce(s^i y)`, `i > 0`".
fn check_prefix_property(fwd: &[Vec<Letter>], k0: usize, degree: usize) -> Result<PrefVerdict> {
    let n = fwd.len();
    let inv: Vec<Vec<Letter>> = fwd.iter().map(|s| s.iter().rev().map(|l| l.inverse()).collect()).collect();
    let fam = Family {
        fwd,
        inv: &inv,
        k0,
        degree,
    };
    let sigmas: Vec<Vec<Letter>> = (0..n).map(|s| fam.sigma(s)).collect();
    let mut by_sigma: HashMap<&[Letter], Vec<usize>> = HashMap::new();
    for (s, sig) in sigmas.iter().enumerate() {
        by_sigma.entry(sig.as_slice()).or_default().push(s);
    }
    let mut multiplicity = 1;
    for group in by_sigma.values() {
        if group.len() >= 3 {
            return Ok(PrefVerdict {
                holds: false,
                multiplicity: group.len(),
                counterexample: Some(format!(
                    "y = e, prefix {} is shared by elements {:?}",
                    word_of(sigmas[group[0]].clone()),
                    &group[..3]
                )),
                witness: Some((
                    ReducedWord::identity(),
                    word_of(sigmas[group[0]].clone()),
                    [group[0], group[1], group[2]],
                )),
            });
        }
        multiplicity = multiplicity.max(group.len());
    }

    // Sort the inverse rays; lcp with any other ray is maximised by a sorted neighbour.
    let cap = |a: usize, b: usize| inv[a].len() + inv[b].len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        let c = cap(a, b);
        (0..c)
            .map(|j| ray(&inv[a], j).cmp(&ray(&inv[b], j)))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut pos = vec![0usize; n];
    for (i, &s) in order.iter().enumerate() {
        pos[s] = i;
    }
    let mut adjacent_lcp = vec![0usize; n.saturating_sub(1)];
    for i in 0..n.saturating_sub(1) {
        let (a, b) = (order[i], order[i + 1]);
        let l = ray_lcp(&inv[a], &inv[b], cap(a, b));
        if l == cap(a, b) {
            return Err(Error::Unsupported(format!(
                "elements {} and {} are powers of a common word",
                word_of(fwd[a].clone()),
                word_of(fwd[b].clone())
            )));
        }
        adjacent_lcp[i] = l;
    }
    let lambda_max: Vec<usize> = (0..n)
        .map(|s| {
            let i = pos[s];
            let left = if i > 0 { adjacent_lcp[i - 1] } else { 0 };
            let right = if i + 1 < n { adjacent_lcp[i] } else { 0 };
            left.max(right)
        })
        .collect();

    // Transient types, filtered by individual satisfiability.
    let mut types: Vec<TransientType> = Vec::new();
    let mut types_of: Vec<Vec<usize>> = vec![Vec::new(); n];
    for s in 0..n {
        let len = fwd[s].len();
        let bound = lambda_max[s] + k0 + len;
        for m in 0..k0 {
            let mut i = 1;
            loop {
                let total = i * len;
                if total >= m {
                    let c = total - m;
                    if c >= bound {
                        break;
                    }
                    let t = TransientType { s, c, m };
                    if fam.solve(&[t], None).is_some() {
                        types_of[s].push(types.len());
                        types.push(t);
                    }
                }
                i += 1;
            }
        }
    }

    // Sigma lookup for the partially stable cases.
    let mut sigma_sorted: Vec<usize> = (0..n).collect();
    sigma_sorted.sort_by(|&a, &b| sigmas[a].cmp(&sigmas[b]));
    let sigma_block = |prefix: &[Letter]| -> Vec<usize> {
        let lo = sigma_sorted.partition_point(|&u| sigmas[u][..prefix.len()] < *prefix);
        let hi = sigma_sorted.partition_point(|&u| sigmas[u][..prefix.len()] <= *prefix);
        sigma_sorted[lo..hi].to_vec()
    };
    let fixed_prefix = |ts: &[TransientType]| -> Vec<Letter> {
        let m = ts.iter().map(|t| t.m).max().unwrap_or(0);
        let t = ts.iter().find(|t| t.m == m).expect("nonempty");
        (0..m).map(|j| ray(&fwd[t.s], j)).collect()
    };

    let fail = |ys: Vec<Letter>, p: Vec<Letter>, who: [usize; 3]| {
        let (y, p) = (word_of(ys), word_of(p));
        PrefVerdict {
            holds: false,
            multiplicity: 3,
            counterexample: Some(format!("y = {y}, prefix {p} is reached by elements {who:?}")),
            witness: Some((y, p, who)),
        }
    };

    // Two stable elements sharing sigma, plus a transient third.
    for group in by_sigma.values().filter(|g| g.len() == 2) {
        let sig = &sigmas[group[0]];
        for (ti, t) in types.iter().enumerate() {
            if group.contains(&t.s) {
                continue;
            }
            if let Some((ys, p)) = fam.solve(&[types[ti]], Some(sig)) {
                return Ok(fail(ys, p, [group[0], group[1], t.s]));
            }
        }
    }

    // Pairs of transient types of distinct elements.
    let mut adjacency: Vec<Vec<usize>> = vec![Vec::new(); types.len()];
    for (ai, a) in types.iter().enumerate() {
        // Partners t whose inverse ray shares at least c_a letters with R_s.
        let i = pos[a.s];
        let mut block = Vec::new();
        let mut lo = i;
        while lo > 0 && adjacent_lcp[lo - 1] >= a.c {
            lo -= 1;
        }
        let mut hi = i;
        while hi + 1 < n && adjacent_lcp[hi] >= a.c {
            hi += 1;
        }
        for &t in &order[lo..=hi] {
            if t != a.s {
                block.push(t);
            }
        }
        for t in block {
            for &bi in &types_of[t] {
                let b = types[bi];
                if b.c < a.c || (b.c == a.c && bi < ai) {
                    continue;
                }
                let shared = a.m.min(b.m);
                if ray_lcp(&fwd[a.s], &fwd[b.s], shared) < shared {
                    continue;
                }
                if fam.solve(&[*a, b], None).is_some() {
                    adjacency[ai].push(bi);
                    adjacency[bi].push(ai);
                }
            }
        }
    }
    if adjacency.iter().any(|v| !v.is_empty()) {
        multiplicity = multiplicity.max(2);
    }

    // One stable element plus a compatible transient pair.
    for (ai, nbrs) in adjacency.iter().enumerate() {
        for &bi in nbrs.iter().filter(|&&bi| bi > ai) {
            let pair = [types[ai], types[bi]];
            let prefix = fixed_prefix(&pair);
            for u in sigma_block(&prefix) {
                if u == pair[0].s || u == pair[1].s {
                    continue;
                }
                if let Some((ys, p)) = fam.solve(&pair, Some(&sigmas[u])) {
                    return Ok(fail(ys, p, [pair[0].s, pair[1].s, u]));
                }
            }
        }
    }

    // Three transient types.
    for (ai, nbrs) in adjacency.iter().enumerate() {
        for &bi in nbrs.iter().filter(|&&bi| bi > ai) {
            for &ci in adjacency[bi].iter().filter(|&&ci| ci > bi) {
                let (a, b, c) = (types[ai], types[bi], types[ci]);
                if c.s == a.s || !adjacency[ai].contains(&ci) {
                    continue;
                }
                if let Some((ys, p)) = fam.solve(&[a, b, c], None) {
                    return Ok(fail(ys, p, [a.s, b.s, c.s]));
                }
            }
        }
    }

    // Multiplicity two through one stable and one transient element.
    if multiplicity < 2 {
        'search: for t in &types {
            let prefix = fixed_prefix(&[*t]);
            for u in sigma_block(&prefix) {
                if u != t.s && fam.solve(&[*t], Some(&sigmas[u])).is_some() {
                    multiplicity = 2;
                    break 'search;
                }
            }
        }
    }

    Ok(PrefVerdict {
        holds: true,
        multiplicity,
        counterexample: None,
        witness: None,
    })
}

fn validate_candidate(candidate: &[ReducedWord]) -> Result<()> {
    if candidate.is_empty() {
        return Err(Error::Precondition("a Schottky candidate must be nonempty".into()));
    }
    if candidate.len() > MAX_CERTIFIED_SIZE {
        return Err(Error::Capacity(format!(
            "{} elements exceed the certification limit of {MAX_CERTIFIED_SIZE}",
            candidate.len()
        )));
    }
    let mut seen = std::collections::HashSet::new();
    for s in candidate {
        if s.is_identity() {
            return Err(Error::Unsupported("the identity is not loxodromic".into()));
        }
        if !s.is_cyclically_reduced() {
            return Err(Error::Unsupported(format!("{s} is not cyclically reduced")));
        }
        if !seen.insert(s) {
            return Err(Error::Precondition(format!("duplicate element {s}")));
        }
    }
    Ok(())
}

fn verdict(property: u8, holds: bool, multiplicity: Option<usize>, counterexample: Option<String>) -> PropertyVerdict {
    PropertyVerdict {
        property,
        holds,
        multiplicity,
        counterexample,
    }
}

fn sigma_verdict(property: u8, rays: &[Vec<Letter>], k0: usize) -> PropertyVerdict {
    let mut groups: HashMap<Vec<Letter>, Vec<usize>> = HashMap::new();
    for (s, r) in rays.iter().enumerate() {
        groups.entry((0..k0).map(|j| ray(r, j)).collect()).or_default().push(s);
    }
    let worst = groups.iter().max_by_key(|(_, g)| g.len()).expect("nonempty");
    let multiplicity = worst.1.len();
    let counterexample = (multiplicity > 1).then(|| {
        format!(
            "x = {} is within K of powers of elements {:?}",
            word_of(worst.0.clone()),
            worst.1
        )
    });
    verdict(property, multiplicity <= 1, Some(multiplicity), counterexample)
}

/// Exact verdict on all seven Schottky properties.
pub fn check_schottky(candidate: &[ReducedWord], params: SchottkyParams) -> Result<SchottkyReport> {
    validate_candidate(candidate)?;
    check_validated(candidate, params, false)
}

fn check_validated(candidate: &[ReducedWord], params: SchottkyParams, short_circuit: bool) -> Result<SchottkyReport> {
    let k0 = params.k0();
    let degree = 2 * candidate.iter().map(|s| s.min_rank()).max().unwrap_or(2).max(2);
    let fwd: Vec<Vec<Letter>> = candidate.iter().map(|s| s.letters().to_vec()).collect();
    let bwd: Vec<Vec<Letter>> = candidate.iter().map(|s| s.inverse().letters().to_vec()).collect();
    let mut props: Vec<PropertyVerdict> = Vec::with_capacity(7);

    // (3): |s^i| = |i|·|s| for cyclically reduced s.
    let kp = params.k_prime as u128;
    let bad3 = candidate
        .iter()
        .find(|s| !(19_990 * kp < 20_000 * s.len() as u128 && s.len() as u128 <= kp));
    let p3 = verdict(
        3,
        bad3.is_none(),
        None,
        bad3.map(|s| format!("|{s}| = {} is outside (0.9995·K′, K′] with K′ = {}", s.len(), params.k_prime)),
    );
    let p4 = verdict(4, true, None, None);
    let p5 = sigma_verdict(5, &fwd, k0);
    let p6 = sigma_verdict(6, &bwd, k0);

    // (7): rays s₁^∞ and (s₂⁻¹)^∞ diverge before k₀.
    let mut bad7 = None;
    'seven: for (i, a) in fwd.iter().enumerate() {
        for (j, b) in bwd.iter().enumerate() {
            let cap = k0.min(a.len() + b.len());
            let l = ray_lcp(a, b, cap);
            if l >= k0 || l == a.len() + b.len() {
                bad7 = Some(format!("rays of {} and the inverse of {} share {l} letters", candidate[i], candidate[j]));
                break 'seven;
            }
        }
    }
    let p7 = verdict(7, bad7.is_none(), None, bad7);

    let cheap_fail = !(p3.holds && p5.holds && p6.holds && p7.holds);
    let (p1, p2) = if short_circuit && cheap_fail {
        (verdict(1, false, None, Some("not evaluated".into())), verdict(2, false, None, Some("not evaluated".into())))
    } else {
        let v1 = check_prefix_property(&fwd, k0, degree)?;
        let p1 = verdict(1, v1.holds, Some(v1.multiplicity), v1.counterexample);
        let p2 = if short_circuit && !p1.holds {
            verdict(2, false, None, Some("not evaluated".into()))
        } else {
            let v2 = check_prefix_property(&bwd, k0, degree)?;
            verdict(2, v2.holds, Some(v2.multiplicity), v2.counterexample)
        };
        (p1, p2)
    };
    props.extend([p1, p2, p3, p4, p5, p6, p7]);
    Ok(SchottkyReport {
        params,
        properties: props,
    })
}

/// Certify with the least integer `K` for which every property holds.
///
/// Passing is monotone in `K`, so the first passing value found by an
/// increasing scan is the least. Fails if no `K` up to twice the longest
/// element (plus slack) passes, or if property (3) fails at the given `K′`.
pub fn certify_with_least_k(elements: Vec<ReducedWord>, k_prime: u64) -> Result<SchottkySet> {
    validate_candidate(&elements)?;
    let max_len = elements.iter().map(|s| s.len()).max().unwrap_or(1);
    let cap = 2 * max_len as i64 + 8;
    for k in 1..=cap {
        let params = SchottkyParams::new(Half::from_int(k), k_prime)?;
        let report = check_validated(&elements, params, true)?;
        if !report.property(3).holds {
            let full = check_validated(&elements, params, false)?;
            return Err(Error::Precondition(format!(
                "property (3) fails for K′ = {k_prime}: {}",
                full.property(3).counterexample.clone().unwrap_or_default()
            )));
        }
        if report.certified() {
            let report = check_validated(&elements, params, false)?;
            return Ok(SchottkySet {
                elements,
                params,
                report,
            });
        }
    }
    Err(Error::Precondition(format!("no K ≤ {cap} certifies the candidate")))
}

/// Shape of the constructed family `{(φ₁²⋯φₙ²)^{2k} : φᵢ ∈ {a, b}}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstructionShape {
    pub n: u32,
    pub big_n: u32,
    pub k: u64,
}

impl ConstructionShape {
    pub fn size(&self) -> usize {
        1usize << self.n
    }

    pub fn k_prime(&self) -> u64 {
        4 * self.n as u64 * self.big_n as u64 * self.k
    }

    /// The smallest shape with at least `min_size` elements of length at least `min_k_prime`.
    pub fn smallest(min_size: u64, min_k_prime: u64) -> Result<Self> {
        let mut n = 1u32;
        while (1u128 << n) < min_size as u128 {
            n += 1;
            if n > MAX_PATTERN_BITS {
                return Err(Error::Capacity(format!(
                    "a Schottky set with {min_size} elements needs more than 2^{MAX_PATTERN_BITS} patterns"
                )));
            }
        }
        let per_k = 4 * n as u64;
        let k = min_k_prime.max(1).div_ceil(per_k);
        Ok(ConstructionShape { n, big_n: 1, k })
    }

    pub fn elements(&self) -> Result<Vec<ReducedWord>> {
        let len = self.k_prime();
        if len as usize > DEFAULT_LENGTH_CAP {
            return Err(Error::Capacity(format!("elements of length {len} exceed the length cap")));
        }
        let a = Letter::new(0, 1);
        let b = Letter::new(1, 1);
        let run = 2 * self.big_n as usize;
        Ok((0..self.size())
            .map(|mask| {
                let mut base = Vec::with_capacity(run * self.n as usize);
                for i in 0..self.n {
                    let phi = if mask >> (self.n - 1 - i) & 1 == 0 { a } else { b };
                    base.extend(std::iter::repeat(phi).take(run));
                }
                let word = ReducedWord::from_reduced(base).expect("positive word");
                word.pow(2 * self.k as i64, DEFAULT_LENGTH_CAP).expect("length checked")
            })
            .collect())
    }
}

/// Build `{(φ₁²⋯φₙ²)^{2k}}` with the smallest `n` and `k` meeting the size and
/// length requirements, certified with the least passing `K`.
pub fn construct_schottky(min_size: u64, min_k_prime: u64) -> Result<SchottkySet> {
    let shape = ConstructionShape::smallest(min_size, min_k_prime)?;
    if shape.size() > MAX_CERTIFIED_SIZE {
        return Err(Error::Capacity(format!(
            "{} elements exceed the certification limit of {MAX_CERTIFIED_SIZE}",
            shape.size()
        )));
    }
    certify_with_least_k(shape.elements()?, shape.k_prime())
}

/// Whether `s₁⋯s_N` is the identity, and whether `d(o, s₁⋯s_N·o) ≥ 0.9·K′·N`.
pub fn check_alternating_nontriviality(s1: &SchottkySet, word_spec: &[ReducedWord]) -> Result<(bool, bool)> {
    if word_spec.is_empty() {
        return Err(Error::Precondition("the sequence must be nonempty".into()));
    }
    let s0 = s1.s0();
    for (i, s) in word_spec.iter().enumerate() {
        if !s0.contains(s) {
            return Err(Error::Precondition(format!("{s} is not in S₁ ∪ S₁⁻¹")));
        }
        if i + 1 < word_spec.len() && *s == word_spec[i + 1].inverse() {
            return Err(Error::Precondition(format!("entries {} and {} are mutually inverse", i + 1, i + 2)));
        }
    }
    let refs: Vec<&ReducedWord> = word_spec.iter().collect();
    let product = ReducedWord::product(&refs, usize::MAX)?;
    let n = word_spec.len() as u128;
    let bound_ok = 10 * product.len() as u128 >= 9 * s1.params().k_prime as u128 * n;
    Ok((product.is_identity(), bound_ok))
}

/// A symmetric generating set containing `e` and nicely populated by the
/// squares of a Schottky set.
#[derive(Clone, Debug)]
pub struct PopulatedGeneratingSet {
    pub set: Arc<GeneratingSet>,
    pub core: SchottkySet,
    pub ratio: BigRational,
    pub additive: i64,
    /// `S₁` as actually used (possibly a certified restriction of `core`).
    sqrt_index: Vec<Option<usize>>,
    /// The set is too large for exact ball censuses.
    pub census_infeasible: bool,
    /// The `K′ > 2L + 5000F` gate was bypassed.
    pub constants_overridden: bool,
}

impl PopulatedGeneratingSet {
    /// Assemble `symmetrize(S′) ∪ {e} ∪ S₁⁽²⁾ ∪ S₁⁽⁻²⁾` for a given Schottky set.
    pub fn assemble(s_prime: &[ReducedWord], core: SchottkySet, ratio: BigRational, additive: i64) -> Result<Self> {
        let mut base: Vec<ReducedWord> = s_prime.to_vec();
        base.push(ReducedWord::identity());
        let mut elements = GeneratingSet::symmetrize(&base).elements().to_vec();
        let mut seen: std::collections::HashSet<ReducedWord> = elements.iter().cloned().collect();
        for s in core.s0() {
            let sq = s.multiply(&s);
            if seen.insert(sq.clone()) {
                elements.push(sq);
            }
        }
        let set = GeneratingSet::new(elements)?;
        let s0 = core.s0();
        let mut sqrt_index = vec![None; set.len()];
        for (j, s) in s0.iter().enumerate() {
            let i = set.index_of(&s.multiply(s)).expect("square inserted");
            if sqrt_index[i].is_some() {
                return Err(Error::Precondition(format!("squares collide at {}", set.get(i))));
            }
            sqrt_index[i] = Some(j);
        }
        let census_infeasible = set.len() > CENSUS_FEASIBLE_SIZE;
        Ok(PopulatedGeneratingSet {
            set: Arc::new(set),
            core,
            ratio,
            additive,
            sqrt_index,
            census_infeasible,
            constants_overridden: false,
        })
    }

    pub fn s1(&self) -> &SchottkySet {
        &self.core
    }

    /// Index in `S₀` of the square root of generator `i`, if it is a Schottky square.
    pub fn sqrt_index(&self, i: usize) -> Option<usize> {
        self.sqrt_index[i]
    }

    pub fn schottky_square_count(&self) -> usize {
        self.sqrt_index.iter().filter(|x| x.is_some()).count()
    }

    /// Whether `#(S₁⁽²⁾ ∪ S₁⁽⁻²⁾) ≥ ratio·#S + additive`.
    pub fn is_nicely_populated(&self) -> bool {
        nicely(self.schottky_square_count(), self.set.len(), &self.ratio, self.additive)
    }
}

fn nicely(squares: usize, total: usize, ratio: &BigRational, additive: i64) -> bool {
    let lhs = BigRational::from_integer(squares.into());
    let rhs = ratio * BigRational::from_integer(total.into()) + BigRational::from_integer(additive.into());
    lhs >= rhs
}

/// Options for [`build_generating_set`].
#[derive(Clone, Debug)]
pub struct BuildOptions {
    pub ratio: BigRational,
    pub additive: i64,
    pub min_k_prime: u64,
    /// Skip the `K′ > 2L + 5000F` gate.
    pub override_constants: bool,
}

impl Default for BuildOptions {
    fn default() -> Self {
        BuildOptions {
            ratio: BigRational::new(9.into(), 10.into()),
            additive: 4,
            min_k_prime: 1,
            override_constants: false,
        }
    }
}

/// Enlarge `S′` into a symmetric generating set containing `e` that is nicely
/// populated by the squares of a constructed Schottky set.
///
/// Unless `override_constants` is set, `K′` is raised above `2L + 5000F` for
/// the tree-default constants at the certified `K`.
pub fn build_generating_set(s_prime: &[ReducedWord], opts: &BuildOptions) -> Result<PopulatedGeneratingSet> {
    if opts.ratio.is_negative() || opts.ratio >= BigRational::one() {
        return Err(Error::Precondition("ratio must lie in [0, 1)".into()));
    }
    let mut base: Vec<ReducedWord> = s_prime.to_vec();
    base.push(ReducedWord::identity());
    let impurity = GeneratingSet::symmetrize(&base).len();
    // Need 2m(1 − ratio) ≥ ratio·#S″ + additive with m = #S₁.
    let need = (&opts.ratio * BigRational::from_integer(impurity.into())
        + BigRational::from_integer(opts.additive.into()))
        / (BigRational::from_integer(2.into()) * (BigRational::one() - &opts.ratio));
    let mut min_size = need.ceil().to_integer().to_u64().unwrap_or(u64::MAX).max(1);
    loop {
        let shape = ConstructionShape::smallest(min_size, opts.min_k_prime)?;
        let mut core = construct_schottky(shape.size() as u64, opts.min_k_prime)?;
        let mut overridden = opts.override_constants;
        if !opts.override_constants {
            let geometry = GeometryParams::tree_defaults(core.params().k);
            if !geometry.admits_k_prime(core.params().k_prime) {
                let gate = (geometry.l * 2 + geometry.f * 5000).floor() as u64 + 1;
                core = construct_schottky(shape.size() as u64, gate.max(opts.min_k_prime))?;
                let geometry = GeometryParams::tree_defaults(core.params().k);
                if !geometry.admits_k_prime(core.params().k_prime) {
                    return Err(Error::Precondition("K′ gate still fails after enlarging K′".into()));
                }
            }
        } else {
            overridden = !GeometryParams::tree_defaults(core.params().k).admits_k_prime(core.params().k_prime);
        }
        let mut built = PopulatedGeneratingSet::assemble(s_prime, core, opts.ratio.clone(), opts.additive)?;
        built.constants_overridden = overridden;
        if built.is_nicely_populated() {
            return Ok(built);
        }
        min_size = 2 * shape.size() as u64;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::word::w;

    fn params(k: i64, kp: u64) -> SchottkyParams {
        SchottkyParams::new(Half::from_int(k), kp).unwrap()
    }

    /// Every k₀-prefix of reduce(s^i y) over y of length ≤ `max_y` and `i ≤ max_i`.
    fn brute_max_multiplicity(set: &[ReducedWord], k0: usize, max_y: usize, max_i: i64, inverse: bool) -> usize {
        let mut ys = vec![ReducedWord::identity()];
        let mut frontier = vec![ReducedWord::identity()];
        for _ in 0..max_y {
            let mut next = Vec::new();
            for y in &frontier {
                for code in 0..4 {
                    let l = Letter::from_code(code);
                    if y.letters().last() != Some(&l.inverse()) {
                        next.push(y.multiply(&ReducedWord::letter(l)));
                    }
                }
            }
            ys.extend(next.iter().cloned());
            frontier = next;
        }
        let mut worst = 0;
        for y in &ys {
            let mut counts: HashMap<Vec<Letter>, std::collections::HashSet<usize>> = HashMap::new();
            for (si, s) in set.iter().enumerate() {
                for i in 1..=max_i {
                    let e = if inverse { -i } else { i };
                    let v = s.pow(e, 1 << 20).unwrap().multiply(y);
                    if v.len() >= k0 {
                        counts.entry(v.letters()[..k0].to_vec()).or_default().insert(si);
                    }
                }
            }
            worst = worst.max(counts.values().map(|c| c.len()).max().unwrap_or(0));
        }
        worst
    }

    #[test]
    fn two_letters_certified() {
        let r = check_schottky(&[w("a"), w("b")], params(2, 1)).unwrap();
        assert!(r.certified(), "{r:?}");
    }

    #[test]
    fn two_letters_fail_length_property() {
        let r = check_schottky(&[w("a"), w("b")], params(2, 2)).unwrap();
        assert_eq!(r.failing(), vec![3]);
    }

    #[test]
    fn input_validation() {
        assert!(matches!(check_schottky(&[w("a"), w("a")], params(2, 1)), Err(Error::Precondition(_))));
        assert!(matches!(check_schottky(&[w("ab"), w("abab")], params(2, 1)), Err(Error::Unsupported(_))));
        assert!(matches!(check_schottky(&[w("abA")], params(2, 1)), Err(Error::Unsupported(_))));
        assert!(matches!(check_schottky(&[ReducedWord::identity()], params(2, 1)), Err(Error::Unsupported(_))));
    }

    #[test]
    fn construct_small_instances() {
        let s = construct_schottky(4, 8).unwrap();
        assert_eq!(s.len(), 4);
        assert!(s.elements().iter().all(|e| e.len() == 8));
        assert!(s.is_certified());
        assert_eq!(s.params().k_prime, 8);
        let mut elems: Vec<String> = s.elements().iter().map(|e| e.to_string()).collect();
        elems.sort();
        assert_eq!(elems, ["aaaaaaaa", "aabbaabb", "bbaabbaa", "bbbbbbbb"]);
        let tiny = construct_schottky(1, 1).unwrap();
        assert!(tiny.is_certified());
        assert_eq!(tiny.elements()[0], w("aaaa"));
        assert!(matches!(construct_schottky(1 << 60, 8), Err(Error::Capacity(_))));
    }

    #[test]
    fn negative_control_k_prime_plus_one() {
        let s = construct_schottky(4, 8).unwrap();
        let p = SchottkyParams::new(s.params().k, s.params().k_prime + 1).unwrap();
        let r = check_schottky(s.elements(), p).unwrap();
        assert!(!r.property(3).holds);
    }

    #[test]
    fn least_k_is_sharp() {
        let s = construct_schottky(8, 12).unwrap();
        let k = s.params().k;
        let below = SchottkyParams::new(k - Half::from_int(1), s.params().k_prime).unwrap();
        assert!(!check_schottky(s.elements(), below).unwrap().certified());
    }

    #[test]
    fn prefix_property_matches_brute_force() {
        let candidates: Vec<Vec<ReducedWord>> = vec![
            vec![w("a"), w("b")],
            vec![w("ab"), w("aB"), w("ba")],
            vec![w("aab"), w("abb"), w("aBB"), w("bab")],
            vec![w("ab"), w("ba"), w("AB")],
            vec![w("aabb"), w("abab"), w("bbaa"), w("baba")],
            vec![w("aaab"), w("aabA"), w("abbb"), w("aBBB")],
        ];
        for set in &candidates {
            for k in 1..=4i64 {
                let k0 = k as usize;
                let fwd: Vec<Vec<Letter>> = set.iter().map(|s| s.letters().to_vec()).collect();
                let v = check_prefix_property(&fwd, k0, 4).unwrap();
                let brute = brute_max_multiplicity(set, k0, 7, 6, false);
                if brute >= 3 {
                    assert!(!v.holds, "{set:?} K={k}: brute force finds a triple");
                }
                assert!(v.multiplicity >= brute.min(3), "{set:?} K={k}");
                if let Some((y, p, who)) = &v.witness {
                    for &s in who {
                        let hit = (1..=(y.len() + k0) as i64 + 2).any(|i| {
                            let z = set[s].pow(i, 1 << 20).unwrap().multiply(y);
                            z.len() >= k0 && z.letters()[..k0] == *p.letters()
                        });
                        assert!(hit, "{set:?} K={k}: element {s} misses {p} under {y}");
                    }
                    assert!(who[0] != who[1] && who[1] != who[2] && who[0] != who[2]);
                } else {
                    assert!(v.holds);
                }
            }
        }
    }

    #[test]
    fn alternating_products() {
        let s1 = SchottkySet::certify(vec![w("a"), w("b")], params(2, 1)).unwrap();
        assert_eq!(check_alternating_nontriviality(&s1, &[w("a"), w("b"), w("a")]).unwrap(), (false, true));
        assert_eq!(check_alternating_nontriviality(&s1, &[w("a"), w("B"), w("a")]).unwrap(), (false, true));
        assert!(check_alternating_nontriviality(&s1, &[w("a"), w("A")]).is_err());
        assert!(check_alternating_nontriviality(&s1, &[]).is_err());
    }

    #[test]
    fn generating_set_sizes() {
        let opts = BuildOptions {
            override_constants: true,
            ..BuildOptions::default()
        };
        let g = build_generating_set(&[w("a"), w("b")], &opts).unwrap();
        assert!(g.is_nicely_populated());
        assert!(g.set.is_symmetric() && g.set.contains_identity());
        assert_eq!(g.s1().len(), 64);
        assert_eq!(g.set.len(), 133);
        let half = BuildOptions {
            ratio: BigRational::new(1.into(), 2.into()),
            additive: 0,
            ..opts.clone()
        };
        let g = build_generating_set(&[], &half).unwrap();
        assert_eq!(g.set.len(), 1 + 2 * g.s1().len());
        assert!(g.is_nicely_populated());
    }

    #[test]
    fn squares_are_injective_and_sets_disjoint_from_inverses() {
        let s = construct_schottky(16, 16).unwrap();
        let s0 = s.s0();
        let squares: std::collections::HashSet<ReducedWord> = s0.iter().map(|x| x.multiply(x)).collect();
        assert_eq!(squares.len(), s0.len());
        for x in s.elements() {
            assert!(!s.elements().contains(&x.inverse()));
        }
    }

    #[test]
    fn restriction_recertifies() {
        let s = construct_schottky(32, 1).unwrap();
        let sub = s.restrict(&(0..25).collect::<Vec<_>>()).unwrap();
        assert_eq!(sub.len(), 25);
        assert!(sub.is_certified());
        assert!(sub.params().k <= s.params().k);
    }
}
