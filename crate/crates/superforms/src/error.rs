//! Crate-wide evaluation error.

use std::fmt;

use crate::grassmann::GrassmannError;
use crate::supermatrix::MatrixError;

/// Error produced while evaluating forms, operators or derivatives.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum EvalError {
    /// The evaluation point lies outside the evaluator's domain (a required
    /// inverse does not exist there).
    Domain(String),
    /// Dimension or signature mismatch between combined objects.
    Shape(String),
    /// A parity constraint was violated.
    Parity(String),
    /// The generator budget of the context was exhausted.
    Budget(String),
    /// A degree precondition failed (e.g. contraction of a degree-0 form).
    Degree(String),
    /// A claimed form failed its defining-equation check.
    InvalidForm(String),
    /// Bounded resampling could not find an admissible instance.
    Sampling(String),
}

impl fmt::Display for EvalError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EvalError::Domain(m) => write!(f, "domain error: {m}"),
            EvalError::Shape(m) => write!(f, "shape error: {m}"),
            EvalError::Parity(m) => write!(f, "parity error: {m}"),
            EvalError::Budget(m) => write!(f, "generator budget exhausted: {m}"),
            EvalError::Degree(m) => write!(f, "degree error: {m}"),
            EvalError::InvalidForm(m) => write!(f, "invalid form: {m}"),
            EvalError::Sampling(m) => write!(f, "sampling failed: {m}"),
        }
    }
}

impl std::error::Error for EvalError {}

impl From<GrassmannError> for EvalError {
    fn from(e: GrassmannError) -> EvalError {
        match e {
            GrassmannError::ContextMismatch { .. } => EvalError::Shape(e.to_string()),
            GrassmannError::GeneratorBudget { .. } => EvalError::Budget(e.to_string()),
            // at evaluation time a failed inverse is a domain violation
            GrassmannError::NotInvertible => EvalError::Domain(e.to_string()),
            GrassmannError::ParityError => EvalError::Parity(e.to_string()),
        }
    }
}

impl From<MatrixError> for EvalError {
    fn from(e: MatrixError) -> EvalError {
        match e {
            MatrixError::Shape(_) => EvalError::Shape(e.to_string()),
            MatrixError::ParityViolation { .. } => EvalError::Parity(e.to_string()),
            MatrixError::NotInvertible => EvalError::Domain(e.to_string()),
            MatrixError::Grassmann(g) => EvalError::from(g),
        }
    }
}
