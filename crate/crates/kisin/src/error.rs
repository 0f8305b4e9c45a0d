//! Error taxonomy shared across the crate.
//!
//! Precision is a hard modulus everywhere: an operation that cannot decide a
//! predicate at the available precision reports `Precision` instead of
//! guessing. Mathematical failures (non-unit inversion, height violations,
//! maps that are not isogenies) get their own variants so callers can map
//! them to distinct exit codes.

use std::fmt;

/// Crate-wide error type.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Error {
    /// Inversion of a non-unit.
    Unit(String),
    /// Operands built over different coefficient parameters.
    Params(String),
    /// The answer is not determined at the working precision.
    Precision(String),
    /// Height bound violated; carries the offending entry description.
    Height(String),
    /// Argument not in Fil^1 where membership is a precondition.
    Fil(String),
    /// Determinant of the map has a u- or P-factor, so the cokernel is not
    /// p-power torsion.
    NotIsogeny(String),
    /// Fixed-point iteration failed to stabilize within its budget.
    NonConvergence { budget: usize, detail: String },
    /// The residual semilinear equation has no invertible solution over the
    /// allowed coefficient extensions.
    ResidualUnsolvable {
        budget: usize,
        suggested: Option<usize>,
    },
    /// Malformed descriptor (CLI layer).
    Schema(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Unit(s) => write!(f, "non-unit inversion: {s}"),
            Error::Params(s) => write!(f, "parameter mismatch: {s}"),
            Error::Precision(s) => write!(f, "insufficient precision: {s}"),
            Error::Height(s) => write!(f, "height bound violated: {s}"),
            Error::Fil(s) => write!(f, "not in Fil^1: {s}"),
            Error::NotIsogeny(s) => write!(f, "not an isogeny: {s}"),
            Error::NonConvergence { budget, detail } => {
                write!(f, "iteration did not stabilize within {budget} rounds: {detail}")
            }
            Error::ResidualUnsolvable { budget, suggested } => match suggested {
                Some(d) => write!(
                    f,
                    "residual equation unsolvable within extension budget {budget}; degree {d} suffices"
                ),
                None => write!(
                    f,
                    "residual equation unsolvable within extension budget {budget}"
                ),
            },
            Error::Schema(s) => write!(f, "schema error: {s}"),
        }
    }
}

impl std::error::Error for Error {}

pub type Result<T> = std::result::Result<T, Error>;
