use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid electrode layout: {0}")]
    InvalidLayout(String),
    #[error("mesh resolution too coarse: {0}")]
    Resolution(String),
    #[error("geometry error: {0}")]
    Geometry(String),
    #[error("contact impedance of electrode {electrode} must be positive, got {value}")]
    InvalidImpedance { electrode: usize, value: f64 },
    #[error("configuration error: {0}")]
    Config(String),
    #[error("linear solver failed after {iterations} iterations (relative residual {residual:.3e})")]
    NumericFailure { iterations: usize, residual: f64 },
    #[error("solution was computed for a different conductivity than the one supplied")]
    Stale,
    #[error("target mesh is not nested in the source mesh: {0}")]
    NotNested(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization error: {0}")]
    Serde(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serde(e.to_string())
    }
}
