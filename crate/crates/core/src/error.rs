use thiserror::Error;

/// Errors raised anywhere in the monitoring pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("degenerate support: training data has zero spread")]
    DegenerateSupport,

    #[error("invalid cdf: {0}")]
    InvalidCdf(String),

    #[error("degenerate training set: total variance {0:e} below threshold")]
    DegenerateTraining(f64),

    #[error("grid size mismatch: expected {expected}, got {got}")]
    GridMismatch { expected: usize, got: usize },

    #[error("index {index} out of range for length {len}")]
    OutOfRange { index: usize, len: usize },

    #[error("no alarm has been raised")]
    NoAlarm,

    #[error("control-limit calibration failed: {0}")]
    CalibrationFailure(String),

    #[error("insufficient tuning data: {0}")]
    InsufficientTuning(String),

    #[error("unknown method `{0}`")]
    UnknownMethod(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
