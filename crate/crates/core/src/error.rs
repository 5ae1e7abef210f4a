use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("window index {index} out of range 1..={count}")]
    WindowIndex { index: usize, count: usize },

    #[error("no detections in this window")]
    NoDetections,

    #[error("nothing to refine: initial manifold has no columns")]
    EmptyManifold,

    #[error("calibration failed: {0}")]
    Calibration(String),

    #[error("malformed file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error("config parse error: {0}")]
    Toml(#[from] toml::de::Error),
}
