//! Pivotal times for random walks on free groups acting on their Cayley trees.
//!
//! The crate is a laboratory for counting arguments about translation
//! lengths. It provides exact arithmetic in the free group `F_r` and its tree
//! metric, Schottky-set certification and construction, the pivot extraction
//! state machine, seeded Monte Carlo estimation and exact lattice-point
//! censuses.
//!
//! Module map:
//!
//! * [`word`]: reduced words, tree distance, Gromov products, translation length.
//! * [`tree`]: a trie of reduced words with fast ancestor queries.
//! * [`geometry`]: witnessing and marking predicates, constant search.
//! * [`schottky`]: Schottky certification, construction and generating sets.
//! * [`pivot`]: trajectories, pivotal times, pivoting, class statistics.
//! * [`walk`]: samplers, the comparison distribution, Monte Carlo reports.
//! * [`census`]: balls, return counts, growth rates, short-translation censuses.

pub mod census;
pub mod error;
pub mod geometry;
pub mod pivot;
pub mod scalar;
pub mod schottky;
pub mod tree;
pub mod walk;
pub mod word;

pub use error::{Error, Result};
pub use scalar::{Half, Scalar};
pub use word::{GeneratingSet, GroupContext, Letter, ReducedWord};

/// Exact rationals used for probabilities and thresholds.
pub type Rational = num_rational::BigRational;

/// Floating-point scalar used for fast approximate curves.
pub type Real = f64;

/// Crate version, embedded in every report.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
