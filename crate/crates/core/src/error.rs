use thiserror::Error;

/// Errors produced anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid root system: {0}")]
    InvalidRootSystem(String),

    #[error("reflection group closure exceeded {cap} elements (input is not a root system?)")]
    GroupTooLarge { cap: usize },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("ball of radius {radius} around {center:?} leaves the truncation box")]
    BallOutsideBox { center: Vec<f64>, radius: f64 },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("eigensolver failure: {0}")]
    Eigen(String),

    #[error("scale {k} outside the window [{k_min}, {k_max}]")]
    ScaleOutOfWindow { k: i32, k_min: i32, k_max: i32 },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("unknown test function kind `{0}`")]
    UnknownKind(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    /// True for failures of the numerics rather than of the input.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Eigen(_))
    }
}
