//! Exact symbolic engine for quadratic Poisson structures on `k[x1,x2,x3]`
//! and their standard deformation quantizations.
//!
//! The crate provides:
//!
//! * an exact coefficient field of rational functions in formal parameters
//!   over small cyclotomic extensions of the rationals ([`scalar`]),
//! * commutative polynomials with quadratic Poisson brackets built from cubic
//!   superpotentials ([`poisson`]),
//! * the quantized algebra: relation derivation, PBW normal forms via exact
//!   per-degree linear solves, commutators ([`quantize`]),
//! * graded maps, automorphism predicates and finite matrix groups
//!   ([`symmetry`]),
//! * trace/determinant/Molien series and reflection classification
//!   ([`reflection`]),
//! * invariant-ring machinery: Reynolds averaging, fixed subspaces,
//!   generator/commutator table verification, semiclassical limits
//!   ([`invariants`]),
//! * the built-in case registry, expression parsing, verification driver and
//!   report types ([`registry`], [`parse`], [`verify`], [`report`]).

pub mod error;
pub mod invariants;
pub mod parse;
pub mod poisson;
pub mod quantize;
pub mod reflection;
pub mod registry;
pub mod report;
pub mod scalar;
pub mod symmetry;
pub mod verify;

pub use error::{Error, Result};
