use thiserror::Error;

/// Failure modes shared by all modules.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Input outside the mathematical domain of an operation
    /// (energy below the potential minimum, unbracketed root, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// A documented precondition was violated by the caller.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// A numerical routine failed to converge.
    #[error("numerical failure in {routine}: {detail}")]
    Numerical { routine: &'static str, detail: String },

    /// Degenerate or nearly degenerate spectrum; the spectral generator is undefined.
    #[error("degenerate spectrum: {0}")]
    Degenerate(String),

    /// Internal logic error, e.g. a collision requested for a particle moving away from the wall.
    #[error("logic error: {0}")]
    Logic(String),
}

impl Error {
    pub(crate) fn numerical(routine: &'static str, detail: impl Into<String>) -> Self {
        Error::Numerical {
            routine,
            detail: detail.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
