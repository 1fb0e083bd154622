//! Crate-wide error type.

use thiserror::Error;

/// Errors surfaced by the estimation library.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied value violates a documented precondition.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A sample block must contain at least one observable.
    #[error("sample block is empty")]
    EmptyBlock,

    /// Observables must be finite.
    #[error("sample {index} is not finite")]
    NonFiniteSample { index: usize },

    /// Adaptive quadrature exhausted its evaluation budget before reaching
    /// the requested tolerance. Never silently returns a partial value.
    #[error("quadrature did not converge on [{a}, {b}] within {evals} evaluations")]
    QuadratureNonConvergence { a: f64, b: f64, evals: usize },

    /// A domain error specific to one estimator, tagged with its name.
    #[error("{method} estimator: {message}")]
    EstimatorDomain {
        method: &'static str,
        message: String,
    },

    /// A Monte Carlo trial inside a benchmark cell failed.
    #[error("trial {trial} failed: {source}")]
    CellTrial {
        trial: usize,
        #[source]
        source: Box<Error>,
    },

    /// Objective function returned a non-finite value where a finite one is
    /// required (e.g. at the initial simplex of the optimizer).
    #[error("objective returned a non-finite value at {context}")]
    NonFiniteObjective { context: String },

    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),

    /// A text input (sample file or CSV) failed to parse.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;
