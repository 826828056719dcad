//! Error types shared across the crate.
//!
//! Most arithmetic is total, but inversion in a tower with a reducible modulus
//! can fail constructively: the failed gcd exhibits a factor of the modulus.
//! That signal is not a fatal error; callers that adjoined the offending level
//! catch it, split the tower, and retry. [`CalcError`] separates the two kinds
//! of failure so split handling never swallows genuine domain errors.

use std::fmt;

use crate::tower::MPoly;

/// A witness that a modulus is reducible: `factor` is a monic proper divisor
/// of the modulus at `level`.
#[derive(Clone, Debug)]
pub struct SplitPoint {
    pub level: usize,
    pub factor: MPoly,
}

/// Outcome of a computation that may request a tower split.
#[derive(Clone, Debug)]
pub enum CalcError {
    /// A zero divisor was hit; the tower must be split at the given point
    /// before the computation can be replayed.
    Split(SplitPoint),
    /// Unrecoverable error.
    Fatal(Error),
}

pub type CResult<T> = Result<T, CalcError>;

impl From<Error> for CalcError {
    fn from(e: Error) -> Self {
        CalcError::Fatal(e)
    }
}

/// Domain errors surfaced by the public API.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Error {
    /// Inversion of zero or division by a zero polynomial.
    DivisionByZero,
    /// Two elements from unrelated towers were combined.
    IncompatibleTowers,
    /// A split was requested at a level the caller supplied, so the answer
    /// depends on which factor of the caller's modulus holds. The input tower
    /// must be refined before the query is meaningful.
    AmbiguousTower { level: usize, factor: String },
    /// The zero polynomial where a nonzero one is required (degree, polygon).
    ZeroPolynomial,
    /// Monomial exponent arithmetic left the machine-width range.
    ExponentOverflow,
    /// An exact division had a nonzero remainder.
    NonExactDivision,
    /// A series computation ran out of certified terms before reaching the
    /// requested order.
    TruncationExhausted,
    /// An operand must have positive degree in y.
    DegreeInY,
    /// Anything else that violates an operation's domain.
    Domain(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::DivisionByZero => write!(f, "division by zero"),
            Error::IncompatibleTowers => write!(f, "elements belong to incompatible towers"),
            Error::AmbiguousTower { level, factor } => write!(
                f,
                "input tower is reducible at level {level} (factor {factor}); \
                 the answer depends on the choice of factor"
            ),
            Error::ZeroPolynomial => write!(f, "operation undefined for the zero polynomial"),
            Error::ExponentOverflow => write!(f, "monomial exponent overflow"),
            Error::NonExactDivision => write!(f, "division was expected to be exact but is not"),
            Error::TruncationExhausted => {
                write!(f, "series truncated before the requested order was certified")
            }
            Error::DegreeInY => write!(f, "operand must have positive degree in y"),
            Error::Domain(msg) => write!(f, "{msg}"),
        }
    }
}

impl std::error::Error for Error {}

impl Error {
    /// Collapse a split signal into a public error: reaching this point means
    /// the ambiguity originates in caller-supplied data.
    pub fn from_calc(e: CalcError) -> Error {
        match e {
            CalcError::Fatal(e) => e,
            CalcError::Split(sp) => Error::AmbiguousTower {
                level: sp.level,
                factor: sp.factor.to_string_generic(),
            },
        }
    }
}
