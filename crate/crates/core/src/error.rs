use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid construction parameters (covariance, weights, model, grid).
    #[error("configuration error: {0}")]
    Config(String),

    /// An operation was called without the inputs its contract requires.
    #[error("usage error: {0}")]
    Usage(String),

    /// A runtime quantity broke a sampler invariant, e.g. a proposal with
    /// zero density at one of its own draws.
    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },

    #[error("exact enumeration needs {terms} terms, above the limit of {limit}")]
    EnumerationTooLarge { terms: u128, limit: u128 },

    #[error("iteration {iteration}: {source}")]
    Step {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn at_iteration(self, iteration: usize) -> Self {
        Error::Step {
            iteration,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::Dimension { expected, actual })
    }
}
