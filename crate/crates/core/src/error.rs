//! Error types shared across the crate.

use thiserror::Error;

/// Errors raised by model construction, sampling, and evaluation.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// A caller-side contract was violated (bad index, mismatched
    /// dimensions, out-of-range parameter).
    #[error("contract violation: {0}")]
    Contract(String),

    /// A matrix expected to be symmetric positive definite was not;
    /// `leading_minor` is the 1-based index of the first non-positive
    /// leading minor found during factorization.
    #[error("matrix is not positive definite (leading minor {leading_minor})")]
    NotPositiveDefinite { leading_minor: usize },

    /// A truncation region carries so little probability mass that no
    /// draw can be produced reliably.
    #[error("truncation region [{lower}, {upper}] has negligible probability mass")]
    NegligibleMass { lower: f64, upper: f64 },

    /// A conditional update could not be formed because a design block
    /// is singular.
    #[error("singular system in {block}")]
    SingularSystem { block: String },

    /// A ranking metric is undefined for the given labels.
    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    /// A sampler step failed; the context names the dyad or node.
    #[error("sampling failed at {context}: {source}")]
    Sampling {
        context: String,
        #[source]
        source: Box<Error>,
    },

    /// Too many replications of a simulation study failed.
    #[error("recovery study failed: {failed} of {total} replications errored")]
    StudyFailed { failed: usize, total: usize },

    /// Invalid run configuration.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

impl Error {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub(crate) fn at(self, context: impl Into<String>) -> Self {
        Error::Sampling {
            context: context.into(),
            source: Box::new(self),
        }
    }
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
