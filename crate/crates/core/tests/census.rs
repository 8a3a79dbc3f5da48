//! Exact counts: return walks, balls, distinct products and injectivity of Schottky sequences.

mod common;

use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::{One, Pow, Zero};
use pivotal::census::{
    ball, distinct_products, growth_rate, returns_brute, returns_dp, returns_exact, schottky_sequences_injective,
    sequence_census, short_translation_census,
};
use pivotal::schottky::{construct_schottky, PopulatedGeneratingSet};
use pivotal::{Error, GroupContext};
use proptest::prelude::*;

const BUDGET: u64 = 1 << 30;

#[test]
fn standard_basis_returns_match_the_tree_recursion() {
    let std2 = GroupContext::new(2).unwrap().standard_basis();
    let std3 = GroupContext::new(3).unwrap().standard_basis();
    for n in 0..=14 {
        assert_eq!(returns_exact(&std2, n, BUDGET).unwrap(), returns_dp(4, n).unwrap(), "n = {n}");
        assert_eq!(returns_exact(&std3, n, BUDGET).unwrap(), returns_dp(6, n).unwrap(), "n = {n}");
    }
    for n in 0..=8 {
        assert_eq!(BigUint::from(returns_brute(&std2, n)), returns_dp(4, n).unwrap());
    }
    assert_eq!(returns_dp(4, 2).unwrap(), BigUint::from(4u32));
    assert_eq!(returns_dp(4, 4).unwrap(), BigUint::from(28u32));
}

#[test]
fn populated_balls_grow_at_least_like_schottky_words() {
    let core = construct_schottky(2, 4).unwrap();
    let s0 = 2 * core.len() as u64;
    let set = PopulatedGeneratingSet::assemble(&[], core, BigRational::new(1.into(), 2.into()), 0).unwrap();
    let census = ball(&set.set, 6, BUDGET).unwrap();
    for n in 1..=6 {
        assert!(census.ball_size(n) >= (s0 - 1).pow(n as u32), "n = {n}");
        assert!(census.spheres[n] > 0);
    }
}

#[test]
fn schottky_sequences_are_injective_up_to_length_six() {
    let s1 = construct_schottky(4, 8).unwrap();
    for n in 0..=6 {
        let (injective, count) = schottky_sequences_injective(&s1, n, BUDGET).unwrap();
        assert!(injective, "n = {n}");
        let expected = if n == 0 { 1 } else { 8 * 7u64.pow(n as u32 - 1) };
        assert_eq!(count, expected);
    }
}

#[test]
fn sequence_counts_are_bounded_by_all_sequences() {
    let toy = common::toy_set();
    let census = sequence_census(&toy, 7, 8, BUDGET).unwrap();
    let size = BigUint::from(toy.len());
    for (n, a) in &census.a {
        assert!(*a <= size.clone().pow(*n as u32));
    }
    for (n, b) in &census.b {
        assert!(*b <= size.clone().pow(*n as u32));
        if n % 2 == 1 {
            assert!(b.is_zero());
        }
    }
    assert!(census.b[&0].is_one());
}

#[test]
fn growth_of_the_standard_ball_is_three() {
    let std2 = GroupContext::new(2).unwrap().standard_basis();
    let census = ball(&std2, 10, BUDGET).unwrap();
    let series = census.spheres.iter().enumerate().map(|(k, &c)| (k, BigUint::from(c))).collect();
    let g = growth_rate(&series, 4).unwrap();
    assert_eq!(g.estimate, BigRational::from_integer(3.into()));
}

#[test]
fn capacity_errors_are_reported() {
    let std2 = GroupContext::new(2).unwrap().standard_basis();
    assert!(matches!(ball(&std2, 30, 1 << 16), Err(Error::Capacity(_))));
    assert!(matches!(distinct_products(&std2, 30, 1 << 16), Err(Error::Capacity(_))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn ball_histograms_account_for_every_element(radius in 0usize..7) {
        let std2 = GroupContext::new(2).unwrap().standard_basis();
        let census = ball(&std2, radius, BUDGET).unwrap();
        for k in 0..=radius {
            let hist: u64 = census.tau_histograms[k].values().sum();
            prop_assert_eq!(hist, census.spheres[k]);
        }
        for k in 1..=radius {
            prop_assert!(census.spheres[k] > 0);
            prop_assert!(census.ball_size(k) > census.ball_size(k - 1));
        }
    }

    #[test]
    fn short_translation_proportions_are_probabilities(n in 0usize..6, num in 0i64..6, den in 1i64..6) {
        let toy = common::toy_set();
        let p = short_translation_census(&toy, n, &BigRational::new(num.into(), den.into()), BUDGET).unwrap();
        prop_assert!(p >= BigRational::zero() && p <= BigRational::one());
    }
}
