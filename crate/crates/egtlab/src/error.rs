use thiserror::Error;

/// Errors shared by all modules.
#[derive(Debug, Error)]
pub enum Error {
    /// A precondition on an argument was violated.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The input is structurally valid but larger than the solver supports.
    #[error("unsupported size: {0}")]
    UnsupportedSize(String),

    /// The game has a continuum of equilibria; components are reported,
    /// never enumerated.
    #[error("degenerate game: {0}")]
    Degenerate(String),
}

pub type Result<T> = std::result::Result<T, Error>;
