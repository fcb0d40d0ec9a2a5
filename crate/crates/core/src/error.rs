// SPDX-License-Identifier: Apache-2.0

use thiserror::Error;

/// Errors produced while constructing or evaluating tradeoff functions and
/// noise distributions.
#[derive(Debug, Clone, PartialEq, Error)]
#[non_exhaustive]
pub enum CndError {
    /// A parameter was outside the domain of the constructor.
    #[error("domain error: {0}")]
    Domain(String),

    /// An input violated a documented precondition (for example a hypothesis
    /// of the construction does not hold).
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// An iterative routine failed to converge.
    #[error("convergence failure: {0}")]
    Convergence(String),

    /// The recursion used to evaluate a constructed cdf went too deep.
    #[error("recursion depth {depth} exceeded the limit of {limit}")]
    RecursionDepth { depth: u64, limit: u64 },

    /// A numerical tensor product could not reach the requested accuracy.
    #[error("grid too coarse: discretization error bound {bound} exceeds {limit}")]
    GridTooCoarse { bound: f64, limit: f64 },

    /// A density evaluation returned a value that cannot be used.
    #[error("density evaluation failed: {0}")]
    Density(String),

    /// Input samples contained NaN or infinite values.
    #[error("non-finite sample at index {0}")]
    NonFinite(usize),
}

pub type Result<T> = std::result::Result<T, CndError>;

pub(crate) fn domain(msg: impl Into<String>) -> CndError {
    CndError::Domain(msg.into())
}

pub(crate) fn precondition(msg: impl Into<String>) -> CndError {
    CndError::Precondition(msg.into())
}
