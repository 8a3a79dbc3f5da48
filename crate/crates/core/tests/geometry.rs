//! Witnessing and marking predicates on random configurations.

use pivotal::geometry::{
    hyperbolicity_defect, is_marked, is_witnessed, minimal_witness_constant, random_reduced_word, ConfigSampler, FactId,
    GeometryParams, HypothesisParams, Segment, WitnessChain,
};
use pivotal::word::{reduce, Letter};
use pivotal::{Half, ReducedWord};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn word(max: usize) -> impl Strategy<Value = ReducedWord> {
    prop::collection::vec((0usize..4).prop_map(Letter::from_code), 0..max).prop_map(reduce)
}

fn prefix(w: &ReducedWord, k: usize) -> ReducedWord {
    ReducedWord::from_reduced(w.letters()[..k].to_vec()).unwrap()
}

/// A backbone of length at least 24 and sorted cut points along it.
fn backbone_with_cuts(cuts: usize) -> impl Strategy<Value = (ReducedWord, Vec<usize>)> {
    (24usize..80, any::<u64>()).prop_flat_map(move |(len, seed)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let backbone = random_reduced_word(&mut rng, 2, len);
        (Just(backbone), prop::collection::vec(0..=len, cuts).prop_map(|mut v| {
            v.sort_unstable();
            v
        }))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn witnessing_is_monotone_in_the_constant(
        x in word(30), y in word(30), pts in prop::collection::vec(word(30), 2..8), d2 in 0i64..40
    ) {
        let segs: Vec<Segment> = pts.chunks(2).filter(|c| c.len() == 2).map(|c| Segment::new(c[0].clone(), c[1].clone())).collect();
        let chain = WitnessChain::new(segs).unwrap();
        let d = Half::from_doubled(d2);
        if is_witnessed(&x, &y, &chain, d) {
            prop_assert!(is_witnessed(&x, &y, &chain, Half::from_doubled(d2 + 1)));
        }
    }

    #[test]
    fn ordered_subsegments_of_a_geodesic_witness_it((bb, cuts) in backbone_with_cuts(6)) {
        let p: Vec<ReducedWord> = cuts.iter().map(|&c| prefix(&bb, c)).collect();
        let chain = WitnessChain::new(vec![
            Segment::new(p[0].clone(), p[1].clone()),
            Segment::new(p[2].clone(), p[3].clone()),
            Segment::new(p[4].clone(), p[5].clone()),
        ]).unwrap();
        prop_assert!(is_witnessed(&ReducedWord::identity(), &bb, &chain, Half::from_doubled(1)));
    }

    #[test]
    fn marking_is_monotone_in_the_constant(
        x in word(20), anchors in prop::collection::vec((word(20), word(20), word(20)), 1..4), y in word(20), d2 in 0i64..30
    ) {
        let gammas: Vec<Segment> = anchors.iter().map(|(a, b, _)| Segment::new(a.clone(), b.clone())).collect();
        let etas: Vec<Segment> = anchors.iter().map(|(a, _, c)| Segment::new(c.clone(), a.clone())).collect();
        if is_marked(&x, &y, &gammas, &etas, Half::from_doubled(d2), false).unwrap() {
            prop_assert!(is_marked(&x, &y, &gammas, &etas, Half::from_doubled(d2 + 1), false).unwrap());
        }
    }

    /// Two fully marked pieces sharing an endpoint concatenate, provided the
    /// junction at the shared point is small.
    #[test]
    fn marked_concatenation((bb, cuts) in backbone_with_cuts(8), d2 in 1i64..6) {
        let p: Vec<ReducedWord> = cuts.iter().map(|&c| prefix(&bb, c)).collect();
        let d = Half::from_doubled(d2);
        // Fully marked pieces: gammas start at x, etas end at y.
        let g1 = vec![Segment::new(p[0].clone(), p[1].clone()), Segment::new(p[2].clone(), p[3].clone())];
        let e1 = vec![Segment::new(p[1].clone(), p[2].clone()), Segment::new(p[3].clone(), p[4].clone())];
        let g2 = vec![Segment::new(p[4].clone(), p[5].clone()), Segment::new(p[6].clone(), p[7].clone())];
        let e2 = vec![Segment::new(p[5].clone(), p[6].clone()), Segment::new(p[7].clone(), bb.clone())];
        let first = is_marked(&p[0], &p[4], &g1, &e1, d, true).unwrap();
        let second = is_marked(&p[4], &bb, &g2, &e2, d, true).unwrap();
        prop_assert!(first && second);
        let gammas: Vec<Segment> = g1.into_iter().chain(g2).collect();
        let etas: Vec<Segment> = e1.into_iter().chain(e2).collect();
        prop_assert!(is_marked(&p[0], &bb, &gammas, &etas, d, true).unwrap());
    }
}

#[test]
fn trees_are_zero_hyperbolic() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let sampler = ConfigSampler::Geodesic {
        rank: 3,
        max_len: 40,
        max_hair: 10,
    };
    for _ in 0..200 {
        let pts = sampler.sample(&mut rng, &[0, 1, 2, 3, 4, 5]);
        assert_eq!(hyperbolicity_defect(&pts), Half::ZERO);
    }
}

#[test]
fn constant_search_is_reproducible() {
    let hyp = HypothesisParams {
        input: Half::from_int(2),
        l: Half::from_int(8),
    };
    let sampler = ConfigSampler::default();
    for fact in FactId::ALL {
        let a = minimal_witness_constant(&sampler, fact, hyp, 2_000, 17).unwrap();
        let b = minimal_witness_constant(&sampler, fact, hyp, 2_000, 17).unwrap();
        assert_eq!(a, b, "{fact}");
        assert_eq!(fact.name().parse::<FactId>().unwrap(), fact);
    }
}

#[test]
fn constant_ladder_is_ordered() {
    for c2 in 1..20 {
        let p = GeometryParams::tree_defaults(Half::from_doubled(c2));
        p.validate().unwrap();
        assert!(p.c <= p.d && p.d <= p.e && p.e <= p.f && p.l >= p.d);
    }
}
