use thiserror::Error;

use crate::dg::DgError;
use crate::linalg::LinalgError;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error(transparent)]
    Dg(#[from] DgError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    /// Endpoints, levels or object tuples do not fit together.
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("not closed: {0}")]
    NotClosed(String),
    #[error("invalid input: {0}")]
    Invalid(String),
    /// A lift formula produced an output that fails its defining identity
    /// under the active sign scheme.
    #[error("calibration error in {stage}: {detail}")]
    Calibration { stage: String, detail: String },
    #[error("generation failed: {0}")]
    Generation(String),
    #[error("malformed file: {0}")]
    Format(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
