use thiserror::Error;

/// Errors raised by the library.
///
/// The variants map onto the exit-code contract of the command-line front end:
/// capacity errors are recoverable resource failures, everything else is a
/// caller mistake.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    /// A length, size or memory budget would be exceeded.
    #[error("capacity exceeded: {0}")]
    Capacity(String),

    /// An operation was called outside its documented domain.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// Witness or marking chains whose anchors do not line up.
    #[error("malformed chain: {0}")]
    MalformedChain(String),

    /// Input the algorithms deliberately do not handle (for example
    /// Schottky candidates that are not cyclically reduced).
    #[error("unsupported input: {0}")]
    Unsupported(String),

    /// Text that does not parse as a word or a number.
    #[error("parse error: {0}")]
    Parse(String),

    /// A series or sample too short for the requested statistic.
    #[error("insufficient data: {0}")]
    InsufficientData(String),
}

pub type Result<T> = std::result::Result<T, Error>;
