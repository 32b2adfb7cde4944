//! Exact face-number machinery for the recursively built Hanner polytopes
//! `P_n^a ⊂ ℝ^{2^n}`: step schedules, truncated generating-function
//! recursions, window composition maps, weighted tree expansions, the
//! lower/upper bound constructions, a small-dimension geometry oracle and an
//! asymptotic exponent harness.

pub mod asymptotics;
pub mod error;
pub mod geometry;
pub mod phi;
pub mod poly;
pub mod recursion;
pub mod schedule;
pub mod selftest;
pub mod trees;

pub use error::{Error, Result};
pub use phi::{compose_window, PhiMap};
pub use poly::{LogDomainPolynomial, TruncatedIntPolynomial};
pub use recursion::{face_numbers, EngineKind, RecursionState};
pub use schedule::{DensityParam, Schedule, StepKind, Window};

/// Serializes a big integer as its decimal string.
pub fn serialize_biguint<S: serde::Serializer>(
    x: &num_bigint::BigUint,
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&x.to_str_radix(10))
}
