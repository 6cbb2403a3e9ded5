//! Error type shared across the engine.

use std::fmt;

/// Errors surfaced by the engine.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Error {
    /// Inversion or division by the zero scalar.
    DivisionByZero,
    /// Two scalars live in cyclotomic fields with no supported common extension.
    UnsupportedCyclotomicOrder(u32),
    /// A specialization made a denominator vanish.
    PoleAtSpecialization(String),
    /// `from_potential` needs a homogeneous cubic.
    NotHomogeneousDegree3,
    /// Structure constants only exist for quadratic brackets.
    NotQuadratic,
    /// The degree-2 relation system has no unique solution.
    SingularRelationSystem,
    /// A per-degree normal-form operator solve failed.
    SingularDegreeSystem { degree: usize },
    /// A PBW consistency check failed; the witness describes the offending expression.
    PbwViolation(String),
    /// classify_reflection needs a finite-order map.
    InfiniteOrder,
    /// Group closure grew past the cap.
    ClosureExceedsCap { cap: usize },
    /// A commutator was not divisible by hbar.
    NotDivisibleByHbar(String),
    /// A polynomial could not be written in the invariant generators.
    NotExpressible(String),
    /// Expression parse failure at a byte offset.
    SyntaxError { offset: usize, message: String },
    /// A variable from the wrong alphabet appeared while parsing.
    AlphabetMismatch { offset: usize, expected: char, found: String },
    /// Registry lookup with an id outside 1..=9.
    UnknownCase(u32),
    /// A custom case's brackets fail the Jacobi identity.
    JacobiFailure(String),
    /// A custom case document is malformed.
    SchemaError(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::DivisionByZero => write!(f, "division by zero scalar"),
            Error::UnsupportedCyclotomicOrder(m) => {
                write!(f, "unsupported cyclotomic order {m} (supported: 1,2,3,4,6,8,12)")
            }
            Error::PoleAtSpecialization(s) => write!(f, "denominator vanishes at specialization: {s}"),
            Error::NotHomogeneousDegree3 => write!(f, "superpotential must be homogeneous of degree 3"),
            Error::NotQuadratic => write!(f, "bracket is not homogeneous quadratic"),
            Error::SingularRelationSystem => write!(f, "relation system has no unique solution"),
            Error::SingularDegreeSystem { degree } => {
                write!(f, "normal-form operator system singular at degree {degree}")
            }
            Error::PbwViolation(w) => write!(f, "PBW consistency violated: {w}"),
            Error::InfiniteOrder => write!(f, "map does not have finite order"),
            Error::ClosureExceedsCap { cap } => write!(f, "group closure exceeds cap {cap}"),
            Error::NotDivisibleByHbar(s) => write!(f, "commutator not divisible by hbar: {s}"),
            Error::NotExpressible(s) => write!(f, "not expressible in the invariant generators: {s}"),
            Error::SyntaxError { offset, message } => write!(f, "syntax error at offset {offset}: {message}"),
            Error::AlphabetMismatch { offset, expected, found } => {
                write!(f, "alphabet mismatch at offset {offset}: expected {expected}-variables, found {found}")
            }
            Error::UnknownCase(id) => write!(f, "unknown case {id} (valid: 1..9)"),
            Error::JacobiFailure(s) => write!(f, "Jacobi identity fails: {s}"),
            Error::SchemaError(s) => write!(f, "invalid case document: {s}"),
        }
    }
}

impl std::error::Error for Error {}

pub type Result<T> = std::result::Result<T, Error>;
