use thiserror::Error;

/// Errors shared by the tree, valuation, Gaussian and replication engines.
#[derive(Debug, Error)]
pub enum Error {
    /// Tree is structurally broken (cycle, orphan, missing root).
    #[error("structural error: {0}")]
    Structure(String),

    /// Tree invariants violated (probabilities, martingale property).
    #[error("validation failed: {}", .0.join("; "))]
    Validation(Vec<String>),

    #[error("argument error: {0}")]
    Argument(String),

    /// Flows or values missing/mismatched for the requested operation.
    #[error("data error: {0}")]
    Data(String),

    /// Singular normal equations / Gram matrix, or a degenerate probe
    /// direction in the well-posedness check.
    #[error("degeneracy: {0}")]
    Degenerate(String),

    /// A desk-scale guard was exceeded (enumeration size, composition depth).
    #[error("guard breached: {0}")]
    Guard(String),

    /// A supplied stopping time is not adapted to the tree filtration.
    #[error("measurability error: {0}")]
    Measurability(String),

    /// Non-finite values produced by a model evaluation.
    #[error("model error: {0}")]
    Model(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
