use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument is outside the domain the operation is defined on.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: expected {expected}, found {found} ({what})")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    /// An iterative solver stopped making progress. `last_iterate` is the
    /// coefficient vector at the point of failure, as `f64`.
    #[error("convergence failure: {reason}")]
    Convergence {
        reason: String,
        last_iterate: Vec<f64>,
    },

    /// Replicate differences vanish for a coordinate, so its noise precision
    /// would be infinite.
    #[error("degenerate measurement noise: coordinate {coordinate} has zero replicate variance")]
    DegenerateNoise { coordinate: usize },

    #[error("noise precision unavailable: {0}")]
    NoiseUnavailable(String),

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    /// A cross-validation training split contains a single response class.
    #[error("cross-validation split has a single response class after re-randomizing folds")]
    SingleClassFold,
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn check_len(what: &'static str, expected: usize, found: usize) -> Result<()> {
        if expected == found {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                what,
                expected,
                found,
            })
        }
    }
}
