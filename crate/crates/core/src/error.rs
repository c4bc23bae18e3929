use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(&'static str),

    #[error("angle must be non-negative, got {0}")]
    NegativeAngle(f64),

    #[error("bandwidth {bandwidth} Hz outside [0, {limit}] Hz")]
    BandwidthOutOfBox { bandwidth: f64, limit: f64 },

    #[error("zero bandwidth for UAV {uav} in coalition of radar {radar}")]
    ZeroBandwidth { uav: usize, radar: usize },

    #[error("UAV {uav} has {count} tasks set; at most one is allowed")]
    RowSum { uav: usize, count: usize },

    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: String, got: String },

    #[error("frame mismatch: assignment is frame {assignment}, bandwidth is frame {bandwidth}")]
    FrameMismatch { assignment: usize, bandwidth: usize },

    #[error("kriging needs at least 2 distinct points, got {0}")]
    TooFewPoints(usize),

    #[error("correlation matrix is not positive definite")]
    SingularCorrelation,

    #[error("unknown algorithm variant `{0}`")]
    UnknownVariant(String),

    #[error("{context}: {source}")]
    Io {
        context: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("toml: {0}")]
    Toml(#[from] toml::de::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            context: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
