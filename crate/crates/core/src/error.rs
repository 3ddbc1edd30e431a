use thiserror::Error;

/// Failure modes shared by every module of the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// Rejected configuration (inadmissible parameters, malformed grids, unknown keys).
    #[error("configuration error: {0}")]
    Config(String),
    /// Argument outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// Request outside the support of the available data (paths too short, radii too large).
    #[error("range error: {0}")]
    Range(String),
    /// Fields living on different grids were combined.
    #[error("shape mismatch: {0}")]
    Shape(String),
    /// Non-finite or runaway state during time stepping.
    #[error("blow-up at t = {time}: last finite energy {last_energy}")]
    BlowUp { time: f64, last_energy: f64 },
    /// Stored artifact missing, truncated or failing its checksum.
    #[error("integrity error: {0}")]
    Integrity(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
