use thiserror::Error;

/// Errors produced anywhere in the regression pipeline.
#[derive(Debug, Error)]
pub enum MtdrError {
    #[error("empty sample")]
    EmptySample,
    #[error("out of domain: {value} not in [{s0}, {s1}]")]
    OutOfDomain { value: f64, s0: f64, s1: f64 },
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("invalid domain [{s0}, {s1}]")]
    InvalidDomain { s0: f64, s1: f64 },
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("quantile values are not a valid quantile function: {0}")]
    InvalidQuantiles(String),
    #[error("invalid weights: {0}")]
    InvalidWeights(String),
    #[error("degenerate weights")]
    DegenerateWeights,
    #[error("weight too small for map update: alpha[{index}] = {value}")]
    WeightTooSmall { index: usize, value: f64 },
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("{path}: row {row}: {message}")]
    Parse {
        path: String,
        row: u64,
        message: String,
    },
    #[error("subject {subject}: missing variable `{variable}`")]
    MissingVariable { subject: String, variable: String },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = MtdrError> = std::result::Result<T, E>;
