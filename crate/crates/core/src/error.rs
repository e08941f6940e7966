use thiserror::Error;

/// Largest dimension for which the 2^p state space is enumerated.
pub const ENUMERATION_LIMIT: usize = 20;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("vertex {vertex} out of range for p = {p}")]
    VertexOutOfRange { vertex: usize, p: usize },

    #[error("invalid spin value {value} at position {position}; spins must be -1 or +1")]
    InvalidSpin { value: i64, position: usize },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("no observations in bandwidth window (tau = {tau}, h = {h})")]
    EmptyWindow { tau: f64, h: f64 },

    #[error("enumeration limit exceeded: p = {p} > {limit}")]
    EnumerationLimit { p: usize, limit: usize },

    #[error("non-finite objective at iteration {iteration}")]
    NonFiniteObjective { iteration: usize },

    #[error("solver for node {node} did not converge after {iterations} iterations (kkt residual {kkt_residual:e})")]
    NotConverged {
        node: usize,
        iterations: usize,
        kkt_residual: f64,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl Error {
    /// True for errors caused by the caller's inputs rather than numerical failure.
    pub fn is_input_error(&self) -> bool {
        !matches!(
            self,
            Error::NonFiniteObjective { .. } | Error::NotConverged { .. } | Error::NonFinite(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
