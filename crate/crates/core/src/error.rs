use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Malformed or out-of-contract input.
    #[error("invalid input: {0}")]
    Input(String),

    /// Exact analysis requested beyond the configured state-space cap.
    #[error("{vertices} vertices exceeds the exact-analysis cap of {cap}; use the Monte Carlo estimators instead")]
    Resource { vertices: usize, cap: usize },

    /// The operation requires an ergodic chain (strictly positive noise).
    #[error("non-ergodic parameters: {0}")]
    NonErgodic(String),

    /// Chain is not irreducible; `from` cannot reach `to`.
    #[error("reducible chain: state {to} is unreachable from state {from}")]
    Reducible { from: usize, to: usize },

    /// A fit had too few usable points.
    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    /// An iterative solver failed to reach its tolerance.
    #[error("solver did not converge: {0}")]
    NoConvergence(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn input<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Input(msg.into()))
}
