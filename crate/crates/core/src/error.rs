use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid parameter schedule: {0}")]
    Schedule(String),

    #[error("mesh mismatch between operator and density")]
    MeshMismatch,

    #[error("degenerate mesh cell {index} (width {width:e})")]
    DegenerateCell { index: usize, width: f64 },

    #[error("invalid mesh: {0}")]
    Mesh(String),

    #[error("infeasible calibration: target mass {target:e} exceeds available mass {available:e}")]
    Infeasible { target: f64, available: f64 },

    #[error("inputs must have equal mass (got {left} and {right})")]
    UnequalMass { left: f64, right: f64 },

    #[error("block count {k} exceeds horizon {n}")]
    BlockCount { k: usize, n: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("cache corruption: {0}")]
    CacheCorruption(String),

    #[error("internal error: {0}")]
    Internal(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    TomlDe(#[from] toml::de::Error),

    #[error(transparent)]
    TomlSer(#[from] toml::ser::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
