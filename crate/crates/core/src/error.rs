use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid observable: {0}")]
    InvalidObservable(String),

    #[error("invalid density matrix: {0}")]
    InvalidState(String),

    #[error("invalid unitary: {0}")]
    InvalidUnitary(String),

    #[error("parameter error: {0}")]
    Parameter(String),

    #[error("shape mismatch: expected dimension {expected}, found {found}")]
    Shape { expected: usize, found: usize },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("inconsistent inputs: {0}")]
    Consistency(String),

    #[error("truncation error: {0}")]
    Truncation(String),

    /// A numerical identity that must hold exactly failed beyond tolerance.
    #[error("invariant breach: {0}")]
    Invariant(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::Shape { expected, found })
    }
}
