//! Sampling reproducibility, Monte Carlo reports and the comparison distribution.

mod common;

use std::sync::Arc;

use num_rational::BigRational;
use num_traits::{One, Zero};
use pivotal::walk::{
    estimate, estimate_event, markov_check, mix_seed, sample_conditioned, sample_path, sum_cdf, upper_tail_exact,
    EstimateReport, NonBacktrackingWalk, WalkConfig, WalkEvent,
};
use pivotal::word::w;
use pivotal::GeneratingSet;
use proptest::prelude::*;

#[test]
fn estimates_are_reproducible_from_the_seed() {
    let engine = common::desk_engine();
    let cfg = WalkConfig::new(2024, 40, 2000).unwrap();
    for name in WalkEvent::NAMES {
        let event = WalkEvent::parse(name, None, engine.params().k_prime).unwrap();
        let a = estimate_event(&engine, &event, &cfg).unwrap();
        let b = estimate_event(&engine, &event, &cfg).unwrap();
        assert_eq!(a, b, "{name}");
        assert_eq!(a.seed, 2024);
    }
    let other = WalkConfig::new(2025, 40, 2000).unwrap();
    let gen = engine.set().set.clone();
    let a = sample_path(&gen, &cfg, 0).unwrap();
    let b = sample_path(&gen, &other, 0).unwrap();
    assert_ne!(a.step_indices(), b.step_indices());
    assert_ne!(mix_seed(1, 2), mix_seed(2, 1));
}

#[test]
fn unknown_events_are_rejected() {
    assert!(WalkEvent::parse("long-translation", None, 24).is_err());
}

#[test]
fn conditioned_samples_have_the_requested_slot_count() {
    let engine = common::desk_engine();
    let cfg = WalkConfig::new(5, 40, 50).unwrap();
    let sample = sample_conditioned(&engine, &cfg, 19, 100_000).unwrap();
    assert!(!sample.cap_hit);
    assert_eq!(sample.counts.len(), 50);
    assert!(sample.counts.iter().all(|&c| c <= 19));
    let capped = sample_conditioned(&engine, &cfg, 40, 100).unwrap();
    assert!(capped.cap_hit && capped.counts.is_empty());
}

#[test]
fn non_backtracking_walks_never_return_immediately() {
    let set = GeneratingSet::new(["a", "b", "A", "B"].iter().map(|s| w(s)).collect()).unwrap();
    let walk = NonBacktrackingWalk::uniform(&set).unwrap();
    let cfg = WalkConfig::new(9, 200, 50).unwrap();
    for trial in 0..cfg.trials {
        let traj = walk.sample(&cfg, trial).unwrap();
        // On the standard basis a non-backtracking walk is a geodesic.
        assert_eq!(traj.endpoint().len(), 200);
    }
}

#[test]
fn markov_comparison_holds_exactly() {
    for n in [1, 2, 5, 10, 25, 40] {
        assert!(markov_check(n).holds, "n = {n}");
    }
}

#[test]
fn exact_tails_complement_the_cdf() {
    let tails = upper_tail_exact(30, 4);
    for (m, tail) in tails.iter().enumerate() {
        let cdf: BigRational = sum_cdf(m, 3);
        assert_eq!(tail + cdf, BigRational::one(), "m = {m}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn estimate_reports_are_ordered(trials in 1u64..5000, frac in 0.0f64..=1.0) {
        let successes = (trials as f64 * frac).floor() as u64;
        let r = EstimateReport::from_counts("x", 10, successes, trials, 0);
        prop_assert!(BigRational::zero() <= r.ci_low);
        prop_assert!(r.ci_low <= r.p_hat);
        prop_assert!(r.p_hat <= r.ci_high);
        prop_assert!(r.ci_high <= BigRational::one());
    }

    #[test]
    fn cdf_is_monotone(m in 0usize..40, x in -60i64..60) {
        let lo: BigRational = sum_cdf(m, x);
        let hi: BigRational = sum_cdf(m, x + 1);
        prop_assert!(lo <= hi);
        prop_assert!(lo >= BigRational::zero() && hi <= BigRational::one());
        let approx: f64 = sum_cdf(m, x);
        prop_assert!((approx - pivotal::scalar::ratio_to_f64(&lo)).abs() < 1e-9);
    }

    #[test]
    fn parallel_estimates_do_not_depend_on_scheduling(seed in any::<u64>()) {
        let set = Arc::new(common::toy_set());
        let cfg = WalkConfig::new(seed, 12, 64).unwrap();
        let a = estimate("even", &set, &cfg, |t| t.endpoint().len() % 4 == 0).unwrap();
        let b = estimate("even", &set, &cfg, |t| t.endpoint().len() % 4 == 0).unwrap();
        prop_assert_eq!(a, b);
    }
}
