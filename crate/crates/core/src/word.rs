//! Free groups on a standard basis and the metric on their Cayley trees.
//!
//! A reduced word is simultaneously a group element `g` and the tree vertex
//! `g·o`, where the base point `o` is the empty word.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::scalar::Half;

/// Default cap on the length of any word produced by a checked product.
pub const DEFAULT_LENGTH_CAP: usize = 1_000_000;

/// Largest rank whose letters can be written with `a..z` / `A..Z`.
pub const MAX_RANK: usize = 26;

/// A basis letter or its inverse, packed as `2·generator + (sign < 0)`.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Letter(u8);

impl Letter {
    pub fn new(generator: usize, sign: i8) -> Self {
        assert!(generator < MAX_RANK, "generator index {generator} out of range");
        assert!(sign == 1 || sign == -1, "sign must be +1 or -1");
        Letter((2 * generator) as u8 | u8::from(sign < 0))
    }

    /// Letter from its packed code `2·generator + (sign < 0)`.
    pub fn from_code(code: usize) -> Self {
        assert!(code < 2 * MAX_RANK);
        Letter(code as u8)
    }

    pub fn code(self) -> usize {
        self.0 as usize
    }

    pub fn generator(self) -> usize {
        (self.0 >> 1) as usize
    }

    pub fn sign(self) -> i8 {
        if self.0 & 1 == 0 {
            1
        } else {
            -1
        }
    }

    pub fn inverse(self) -> Self {
        Letter(self.0 ^ 1)
    }

    pub fn to_char(self) -> char {
        let base = if self.sign() > 0 { b'a' } else { b'A' };
        (base + self.generator() as u8) as char
    }

    pub fn from_char(c: char) -> Option<Self> {
        match c {
            'a'..='z' => Some(Letter::new(c as usize - 'a' as usize, 1)),
            'A'..='Z' => Some(Letter::new(c as usize - 'A' as usize, -1)),
            _ => None,
        }
    }
}

impl fmt::Debug for Letter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_char())
    }
}

/// A freely reduced word over the standard basis.
#[derive(Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ReducedWord {
    letters: Vec<Letter>,
}

/// Freely reduce a sequence of letters.
pub fn reduce<I: IntoIterator<Item = Letter>>(letters: I) -> ReducedWord {
    let mut out: Vec<Letter> = Vec::new();
    for l in letters {
        if out.last() == Some(&l.inverse()) {
            out.pop();
        } else {
            out.push(l);
        }
    }
    ReducedWord { letters: out }
}

/// Length of the longest common prefix of two letter slices.
pub fn lcp(u: &[Letter], v: &[Letter]) -> usize {
    u.iter().zip(v).take_while(|(x, y)| x == y).count()
}

impl ReducedWord {
    /// The identity element, i.e. the base point `o`.
    pub fn identity() -> Self {
        ReducedWord { letters: Vec::new() }
    }

    pub fn letter(l: Letter) -> Self {
        ReducedWord { letters: vec![l] }
    }

    /// Wrap letters that are already known to be reduced.
    ///
    /// Returns `None` if an adjacent pair cancels.
    pub fn from_reduced(letters: Vec<Letter>) -> Option<Self> {
        if letters.windows(2).any(|w| w[0] == w[1].inverse()) {
            None
        } else {
            Some(ReducedWord { letters })
        }
    }

    /// Parse text such as `aBab`; unreduced input is rejected.
    pub fn parse(text: &str) -> Result<Self> {
        let letters = parse_letters(text)?;
        ReducedWord::from_reduced(letters)
            .ok_or_else(|| Error::Parse(format!("word {text:?} is not freely reduced")))
    }

    /// Parse text and freely reduce it.
    pub fn parse_reducing(text: &str) -> Result<Self> {
        Ok(reduce(parse_letters(text)?))
    }

    pub fn letters(&self) -> &[Letter] {
        &self.letters
    }

    pub fn into_letters(self) -> Vec<Letter> {
        self.letters
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    pub fn is_identity(&self) -> bool {
        self.letters.is_empty()
    }

    /// Largest generator index used, plus one (0 for the identity).
    pub fn min_rank(&self) -> usize {
        self.letters.iter().map(|l| l.generator() + 1).max().unwrap_or(0)
    }

    pub fn inverse(&self) -> Self {
        ReducedWord {
            letters: self.letters.iter().rev().map(|l| l.inverse()).collect(),
        }
    }

    pub fn multiply(&self, other: &ReducedWord) -> ReducedWord {
        let c = cancellation(&self.letters, &other.letters);
        let mut letters = Vec::with_capacity(self.len() + other.len() - 2 * c);
        letters.extend_from_slice(&self.letters[..self.len() - c]);
        letters.extend_from_slice(&other.letters[c..]);
        ReducedWord { letters }
    }

    /// Product of several words, failing if any intermediate result exceeds `cap`.
    pub fn product(words: &[&ReducedWord], cap: usize) -> Result<ReducedWord> {
        let mut acc = ReducedWord::identity();
        for w in words {
            if acc.len() + w.len() > cap && acc.len() + w.len() - 2 * cancellation(&acc.letters, &w.letters) > cap {
                return Err(Error::Capacity(format!("product longer than the cap of {cap} letters")));
            }
            acc = acc.multiply(w);
        }
        Ok(acc)
    }

    /// `self^k` for any integer `k`, failing beyond `cap` letters.
    pub fn pow(&self, k: i64, cap: usize) -> Result<ReducedWord> {
        let base = if k < 0 { self.inverse() } else { self.clone() };
        let k = k.unsigned_abs() as usize;
        let (core, conj) = base.cyclic_reduce();
        let len = core.len().saturating_mul(k).saturating_add(2 * conj.len());
        if k > 0 && !core.is_empty() && len > cap {
            return Err(Error::Capacity(format!("power of length {len} exceeds the cap of {cap} letters")));
        }
        if k == 0 || core.is_empty() {
            return Ok(ReducedWord::identity());
        }
        let mut letters = Vec::with_capacity(len);
        letters.extend_from_slice(&conj.letters);
        for _ in 0..k {
            letters.extend_from_slice(&core.letters);
        }
        letters.extend(conj.letters.iter().rev().map(|l| l.inverse()));
        Ok(ReducedWord { letters })
    }

    /// Tree distance `d(self·o, other·o) = |self⁻¹ other|`.
    pub fn distance(&self, other: &ReducedWord) -> usize {
        self.len() + other.len() - 2 * lcp(&self.letters, &other.letters)
    }

    /// Gromov product `(y, z)_base`, exact.
    pub fn gromov_product(y: &ReducedWord, z: &ReducedWord, base: &ReducedWord) -> Half {
        Half::from_doubled(gromov_doubled(y.letters(), z.letters(), base.letters()))
    }

    /// Split `self = conjugator · core · conjugator⁻¹` with `core` cyclically reduced.
    pub fn cyclic_reduce(&self) -> (ReducedWord, ReducedWord) {
        let n = self.len();
        let mut k = 0;
        while 2 * k + 1 < n && self.letters[k] == self.letters[n - 1 - k].inverse() {
            k += 1;
        }
        let core = ReducedWord {
            letters: self.letters[k..n - k].to_vec(),
        };
        let conj = ReducedWord {
            letters: self.letters[..k].to_vec(),
        };
        (core, conj)
    }

    pub fn is_cyclically_reduced(&self) -> bool {
        self.len() < 2 || self.letters[0] != self.letters[self.len() - 1].inverse()
    }

    /// Translation length of the action on the tree: the length of the cyclic core.
    pub fn translation_length(&self) -> usize {
        cyclic_core_len(&self.letters)
    }

    /// `d(o, g^k o) / k`, computed from the exact power.
    pub fn asymptotic_translation_length(&self, k_max: usize, cap: usize) -> Result<Ratio<u64>> {
        if k_max == 0 {
            return Err(Error::Precondition("k_max must be at least 1".into()));
        }
        let power = self.pow(k_max as i64, cap)?;
        Ok(Ratio::new(power.len() as u64, k_max as u64))
    }

    /// Letters of `self^∞` (the word must be cyclically reduced for this to be a geodesic ray).
    pub fn periodic_letter(&self, i: usize) -> Letter {
        self.letters[i % self.len()]
    }
}

/// Number of letters that cancel when `u` is followed by `v`.
pub fn cancellation(u: &[Letter], v: &[Letter]) -> usize {
    u.iter()
        .rev()
        .zip(v)
        .take_while(|(x, y)| **x == y.inverse())
        .count()
}

/// Twice the Gromov product `(y, z)_x` of three reduced words.
pub fn gromov_doubled(y: &[Letter], z: &[Letter], x: &[Letter]) -> i64 {
    let d = |u: &[Letter], v: &[Letter]| (u.len() + v.len() - 2 * lcp(u, v)) as i64;
    d(x, y) + d(x, z) - d(y, z)
}

/// Length of the cyclic core of a reduced word.
pub fn cyclic_core_len(letters: &[Letter]) -> usize {
    let n = letters.len();
    let mut k = 0;
    while 2 * k + 1 < n && letters[k] == letters[n - 1 - k].inverse() {
        k += 1;
    }
    n - 2 * k
}

/// Reduced length and translation length of the product `w₁ w₂ ⋯ w_m` of
/// reduced words, without materialising the product.
///
/// Runs in time proportional to the number of pieces plus the number of
/// cancelled letters, which keeps exhaustive substitution scans cheap when a
/// few short words are spliced into long ones.
pub fn product_lengths(pieces: &[&[Letter]]) -> (usize, usize) {
    let mut stack: Vec<&[Letter]> = Vec::with_capacity(pieces.len());
    for &piece in pieces {
        let mut rest = piece;
        while !rest.is_empty() {
            match stack.last_mut() {
                Some(top) => {
                    let c = cancellation(top, rest);
                    if c == 0 {
                        break;
                    }
                    *top = &top[..top.len() - c];
                    rest = &rest[c..];
                    if top.is_empty() {
                        stack.pop();
                    }
                }
                None => break,
            }
        }
        if !rest.is_empty() {
            stack.push(rest);
        }
    }
    let total: usize = stack.iter().map(|s| s.len()).sum();
    if stack.is_empty() {
        return (0, 0);
    }
    // Peel matching letters off both ends.
    let (mut fi, mut fo) = (0usize, 0usize);
    let (mut bi, mut bo) = (stack.len() - 1, stack[stack.len() - 1].len());
    let mut remaining = total;
    while remaining >= 2 {
        let first = stack[fi][fo];
        let last = stack[bi][bo - 1];
        if first != last.inverse() {
            break;
        }
        remaining -= 2;
        fo += 1;
        if fo == stack[fi].len() {
            fi += 1;
            fo = 0;
        }
        bo -= 1;
        if bo == 0 && bi > 0 {
            bi -= 1;
            bo = stack[bi].len();
        }
    }
    (total, remaining)
}

fn parse_letters(text: &str) -> Result<Vec<Letter>> {
    let text = text.trim();
    if text == "e" || text == "1" || text.is_empty() {
        return Ok(Vec::new());
    }
    text.chars()
        .filter(|c| !c.is_whitespace())
        .map(|c| Letter::from_char(c).ok_or_else(|| Error::Parse(format!("unexpected character {c:?} in word"))))
        .collect()
}

impl fmt::Display for ReducedWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_empty() {
            return write!(f, "e");
        }
        for l in &self.letters {
            write!(f, "{}", l.to_char())?;
        }
        Ok(())
    }
}

impl fmt::Debug for ReducedWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl FromStr for ReducedWord {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        ReducedWord::parse(s)
    }
}

impl Serialize for ReducedWord {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ReducedWord {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        ReducedWord::parse(&s).map_err(serde::de::Error::custom)
    }
}

/// The ambient free group `F_r`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupContext {
    pub rank: usize,
}

impl GroupContext {
    pub fn new(rank: usize) -> Result<Self> {
        if !(2..=MAX_RANK).contains(&rank) {
            return Err(Error::Precondition(format!("rank must lie in 2..={MAX_RANK}, got {rank}")));
        }
        Ok(GroupContext { rank })
    }

    /// All `2r` letters, positive and negative.
    pub fn letters(&self) -> impl Iterator<Item = Letter> + '_ {
        (0..2 * self.rank).map(Letter::from_code)
    }

    /// The standard symmetric basis `{a, A, b, B, …}`.
    pub fn standard_basis(&self) -> GeneratingSet {
        GeneratingSet::new(self.letters().map(ReducedWord::letter).collect()).expect("letters are distinct")
    }

    pub fn contains(&self, w: &ReducedWord) -> bool {
        w.min_rank() <= self.rank
    }
}

impl Default for GroupContext {
    fn default() -> Self {
        GroupContext { rank: 2 }
    }
}

/// A finite set of group elements used as random-walk steps or word-metric generators.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GeneratingSet {
    elements: Vec<ReducedWord>,
    index: HashMap<ReducedWord, usize>,
    symmetric: bool,
    contains_identity: bool,
}

impl GeneratingSet {
    /// Build from distinct elements; order is preserved.
    pub fn new(elements: Vec<ReducedWord>) -> Result<Self> {
        let mut index = HashMap::with_capacity(elements.len());
        for (i, w) in elements.iter().enumerate() {
            if index.insert(w.clone(), i).is_some() {
                return Err(Error::Precondition(format!("duplicate generator {w}")));
            }
        }
        let symmetric = elements.iter().all(|w| index.contains_key(&w.inverse()));
        let contains_identity = index.contains_key(&ReducedWord::identity());
        Ok(GeneratingSet {
            elements,
            index,
            symmetric,
            contains_identity,
        })
    }

    /// Add inverses of all elements (keeping first-seen order, duplicates dropped).
    pub fn symmetrize(elements: &[ReducedWord]) -> Self {
        let mut out: Vec<ReducedWord> = Vec::new();
        let mut seen = std::collections::HashSet::new();
        for w in elements {
            for v in [w.clone(), w.inverse()] {
                if seen.insert(v.clone()) {
                    out.push(v);
                }
            }
        }
        GeneratingSet::new(out).expect("duplicates removed")
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

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn contains_identity(&self) -> bool {
        self.contains_identity
    }

    pub fn index_of(&self, w: &ReducedWord) -> Option<usize> {
        self.index.get(w).copied()
    }

    pub fn get(&self, i: usize) -> &ReducedWord {
        &self.elements[i]
    }

    /// Index of the inverse of element `i`, when present.
    pub fn inverse_index(&self, i: usize) -> Option<usize> {
        self.index_of(&self.elements[i].inverse())
    }

    pub fn max_len(&self) -> usize {
        self.elements.iter().map(|w| w.len()).max().unwrap_or(0)
    }

    pub fn min_rank(&self) -> usize {
        self.elements.iter().map(|w| w.min_rank()).max().unwrap_or(0)
    }
}

impl Serialize for GeneratingSet {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.elements.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for GeneratingSet {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let elements = Vec::<ReducedWord>::deserialize(deserializer)?;
        GeneratingSet::new(elements).map_err(serde::de::Error::custom)
    }
}

/// Shorthand used throughout the tests: parse a word that must be reduced.
pub fn w(text: &str) -> ReducedWord {
    ReducedWord::parse(text).unwrap_or_else(|e| panic!("{e}"))
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE_WORD: &str = "ABaaabaaBBAABAAAba";

    /// Letter-by-letter stack reduction, written independently of `reduce`.
    fn naive_reduce(text: &str) -> String {
        let mut out: Vec<char> = Vec::new();
        for c in text.chars() {
            let inv = if c.is_ascii_lowercase() {
                c.to_ascii_uppercase()
            } else {
                c.to_ascii_lowercase()
            };
            if out.last() == Some(&inv) {
                out.pop();
            } else {
                out.push(c);
            }
        }
        if out.is_empty() {
            "e".into()
        } else {
            out.into_iter().collect()
        }
    }

    #[test]
    fn reduce_examples() {
        assert!(ReducedWord::parse_reducing("aA").unwrap().is_identity());
        assert_eq!(ReducedWord::parse_reducing("abBa").unwrap(), w("aa"));
        let word = ReducedWord::parse_reducing(SAMPLE_WORD).unwrap();
        assert_eq!(word.len(), 18);
        assert_eq!(word.to_string(), SAMPLE_WORD);
    }

    #[test]
    fn parse_rejects_unreduced() {
        assert!(ReducedWord::parse("abBa").is_err());
        assert!(ReducedWord::parse("a1").is_err());
        assert_eq!(ReducedWord::parse("e").unwrap(), ReducedWord::identity());
    }

    #[test]
    fn multiply_examples() {
        assert!(w("ab").multiply(&w("BA")).is_identity());
        assert_eq!(w("ab").multiply(&w("ba")), w("abba"));
        let oracle = naive_reduce("aaAb");
        assert_eq!(w("aa").multiply(&w("Ab")).to_string(), oracle);
        assert_eq!(oracle, "ab");
    }

    #[test]
    fn distance_examples() {
        let e = ReducedWord::identity();
        assert_eq!(e.distance(&e), 0);
        assert_eq!(e.distance(&w("ab")), 2);
        assert_eq!(w("ab").distance(&w("aB")), 2);
        assert_eq!(naive_reduce("BAaB"), "BB");
    }

    #[test]
    fn gromov_examples() {
        let e = ReducedWord::identity();
        assert_eq!(ReducedWord::gromov_product(&w("ab"), &w("ab"), &e), Half::from_int(2));
        assert_eq!(ReducedWord::gromov_product(&w("aa"), &w("AA"), &e), Half::ZERO);
        // Three distance calls as an independent oracle.
        let (y, z) = (w("ab"), w("aB"));
        let by_distances = (e.distance(&y) + e.distance(&z) - y.distance(&z)) as i64;
        assert_eq!(ReducedWord::gromov_product(&y, &z, &e).doubled(), by_distances);
        assert_eq!(ReducedWord::gromov_product(&y, &z, &e), Half::from_int(1));
    }

    /// Peel matching end letters one at a time, as an oracle for `cyclic_reduce`.
    fn peel(text: &str) -> (String, usize) {
        let mut s: Vec<char> = text.chars().collect();
        let mut peeled = 0;
        while s.len() >= 2 {
            let (f, l) = (s[0], s[s.len() - 1]);
            let inverse = f != l && f.eq_ignore_ascii_case(&l);
            if !inverse {
                break;
            }
            s.remove(0);
            s.pop();
            peeled += 1;
        }
        (s.into_iter().collect(), peeled)
    }

    #[test]
    fn cyclic_reduce_examples() {
        let (core, conj) = w("abA").cyclic_reduce();
        assert_eq!((core, conj), (w("b"), w("a")));
        let (core, conj) = ReducedWord::identity().cyclic_reduce();
        assert!(core.is_identity() && conj.is_identity());
        let (core, conj) = w(SAMPLE_WORD).cyclic_reduce();
        let (oracle_core, oracle_peeled) = peel(SAMPLE_WORD);
        assert_eq!(core, w("BB"));
        assert_eq!(core.to_string(), oracle_core);
        assert_eq!(conj.len(), 8);
        assert_eq!(conj.len(), oracle_peeled);
        let rebuilt = conj.multiply(&core).multiply(&conj.inverse());
        assert_eq!(rebuilt, w(SAMPLE_WORD));
    }

    #[test]
    fn translation_length_examples() {
        assert_eq!(ReducedWord::identity().translation_length(), 0);
        assert_eq!(w("abA").translation_length(), 1);
        assert_eq!(w(SAMPLE_WORD).translation_length(), 2);
        assert_eq!(w(SAMPLE_WORD).len(), 18);
    }

    #[test]
    fn asymptotic_translation_length_examples() {
        let cap = DEFAULT_LENGTH_CAP;
        assert_eq!(w("a").asymptotic_translation_length(5, cap).unwrap(), Ratio::from_integer(1));
        for k in 2..=10u64 {
            // d(o, (abA)^k o) = k + 2 by direct power computation
            let direct = w("abA").pow(k as i64, cap).unwrap().len() as u64;
            assert_eq!(direct, k + 2);
            assert_eq!(w("abA").asymptotic_translation_length(k as usize, cap).unwrap(), Ratio::new(k + 2, k));
        }
        let g = w(SAMPLE_WORD);
        let mut naive = ReducedWord::identity();
        for _ in 0..20 {
            naive = naive.multiply(&g);
        }
        assert_eq!(naive.len(), 2 * 20 + 16);
        assert_eq!(g.asymptotic_translation_length(20, cap).unwrap(), Ratio::new(56, 20));
        assert!(matches!(g.asymptotic_translation_length(20, 30), Err(Error::Capacity(_))));
        assert!(g.asymptotic_translation_length(0, cap).is_err());
    }

    #[test]
    fn product_lengths_matches_materialised_product() {
        let pieces = [w("abA"), w("aBBa"), w("Ab"), w("BAb")];
        let mut prod = ReducedWord::identity();
        for p in &pieces {
            prod = prod.multiply(p);
        }
        let slices: Vec<&[Letter]> = pieces.iter().map(|p| p.letters()).collect();
        assert_eq!(product_lengths(&slices), (prod.len(), prod.translation_length()));
        assert_eq!(product_lengths(&[w("ab").letters(), w("BA").letters()]), (0, 0));
    }

    #[test]
    fn generating_set_validation() {
        assert!(GeneratingSet::new(vec![w("a"), w("a")]).is_err());
        let basis = GroupContext::default().standard_basis();
        assert_eq!(basis.len(), 4);
        assert!(basis.is_symmetric());
        assert!(!basis.contains_identity());
        let sym = GeneratingSet::symmetrize(&[w("ab"), w("BA"), ReducedWord::identity()]);
        assert_eq!(sym.len(), 3);
        assert!(sym.contains_identity());
    }
}
