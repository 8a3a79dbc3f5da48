//! Fixtures shared by the integration tests.
#![allow(dead_code)]

use std::sync::Arc;

use num_rational::BigRational;
use pivotal::pivot::PivotEngine;
use pivotal::schottky::{build_generating_set, construct_schottky, BuildOptions, PopulatedGeneratingSet};
use pivotal::word::w;
use pivotal::GeneratingSet;

/// The desk-scale set: `S′ = {a, b}`, ratio 9/10, margin 4 (64 Schottky
/// elements, 133 generators). Its `K′` is below the `2L + 5000F` gate, so
/// the gate is overridden.
pub fn desk_set() -> Arc<PopulatedGeneratingSet> {
    let opts = BuildOptions {
        override_constants: true,
        ..Default::default()
    };
    Arc::new(build_generating_set(&[w("a"), w("b")], &opts).expect("desk-scale set"))
}

pub fn desk_engine() -> PivotEngine {
    PivotEngine::with_defaults(desk_set()).expect("engine")
}

/// A set whose Schottky part has exactly 25 elements.
pub fn set_with_25() -> Arc<PopulatedGeneratingSet> {
    let core = construct_schottky(32, 24).expect("32 elements").restrict(&(0..25).collect::<Vec<_>>()).expect("restriction");
    Arc::new(
        PopulatedGeneratingSet::assemble(&[w("a"), w("b")], core, BigRational::new(9.into(), 10.into()), 4)
            .expect("assembly"),
    )
}

/// `S = {a², ab, ba, a⁻², b⁻¹a⁻¹, a⁻¹b⁻¹}`.
pub fn toy_set() -> GeneratingSet {
    GeneratingSet::new(["aa", "ab", "ba", "AA", "BA", "AB"].iter().map(|s| w(s)).collect()).expect("toy set")
}
