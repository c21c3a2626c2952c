//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Matrix or vector dimensions do not line up.
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    Dimension {
        context: &'static str,
        expected: String,
        got: String,
    },

    /// A set description violates its structural invariants.
    #[error("invalid geometry: {0}")]
    Geometry(String),

    /// An argument is outside its admissible domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// The conic solver did not return an optimal point.
    #[error("solver failure: terminated with status {status}")]
    Solver { status: crate::conic::SolveStatus },

    /// The program was solved but postprocessing rejected the result.
    #[error("certification failed: {0}")]
    Certification(String),

    /// A contrast column fails the admissibility constraints.
    #[error("inadmissible contrast column {column}: {reason}")]
    InadmissibleColumn { column: usize, reason: String },

    /// The randomized decomposition did not terminate within its round budget.
    #[error("cone decomposition exhausted {rounds} randomization rounds")]
    DecompositionExhausted { rounds: u32 },

    /// Malformed configuration or input file.
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn dim(context: &'static str, expected: impl ToString, got: impl ToString) -> Self {
        Error::Dimension {
            context,
            expected: expected.to_string(),
            got: got.to_string(),
        }
    }
}
