//! Error type shared by every module in the crate.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A matrix or vector dimension is empty or inconsistent.
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    /// A configuration field violates its documented invariant.
    #[error("invalid config: {field}: {reason}")]
    InvalidConfig { field: &'static str, reason: String },

    /// An index is out of its admissible range.
    #[error("invalid index: {0}")]
    InvalidIndex(String),

    /// The matrix has no inverse (or duplicate Vandermonde nodes collapsed it).
    #[error("singular matrix: {0}")]
    SingularMatrix(String),

    /// Input claimed to be Hermitian deviates from A = A* beyond tolerance.
    #[error("matrix not Hermitian: max deviation {deviation:.3e} exceeds tolerance {tol:.3e}")]
    NotHermitian { deviation: f64, tol: f64 },

    /// An iterative routine ran out of iterations or hit a numeric dead end.
    #[error("numeric failure: {0}")]
    Numeric(String),

    /// The request exceeds the exhaustive-enumeration caps this crate supports.
    #[error("desk-scale limit exceeded: {0}")]
    DeskScaleLimit(String),

    /// Constellation size is not square QAM or BPSK.
    #[error("unsupported constellation size {0}")]
    UnsupportedConstellation(usize),

    /// Constellation collapsed to a single point (or zero energy).
    #[error("degenerate constellation: {0}")]
    DegenerateConstellation(String),

    /// Message index does not address a codeword.
    #[error("invalid message index {index} for codebook of size {size}")]
    InvalidMessage { index: u64, size: u64 },

    /// Codebook is empty or its words have inconsistent shapes.
    #[error("invalid codebook: {0}")]
    InvalidCodebook(String),

    /// Transmit frame shape is inconsistent with the channel.
    #[error("invalid frame: {0}")]
    InvalidFrame(String),

    /// Selection plan has duplicate or out-of-range indices.
    #[error("invalid selection plan: {0}")]
    InvalidPlan(String),

    /// Pairwise quantity requested for a zero codeword difference.
    #[error("undefined pair: {0}")]
    UndefinedPair(String),

    /// Not enough qualifying data points for the requested estimate.
    #[error("insufficient data: {0}")]
    InsufficientData(String),
}
