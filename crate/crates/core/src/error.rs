use thiserror::Error;

/// Errors shared by every module of the workbench.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("index {index} out of range (limit {limit})")]
    Index { index: usize, limit: usize },
    #[error("AMP diverged at step {step}: {reason}")]
    Divergence { step: usize, reason: String },
    #[error("numerical error: {0}")]
    Numerical(String),
    #[error("resource cap exceeded: {0}")]
    Resource(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("degree cap {cap} insufficient: discrepancy {best:.3e} above {delta:.3e} (curve {curve:?})")]
    DegreeInsufficient { cap: u32, delta: f64, best: f64, curve: Vec<(u32, f64)> },
    #[error("calibration failed: {0}")]
    Calibration(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
