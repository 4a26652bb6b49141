use thiserror::Error;

/// Errors raised by the estimators, the models and the numerical kernels.
#[derive(Debug, Error)]
pub enum Error {
    #[error("pole of the gamma function at z = {re} + {im}i")]
    Pole { re: f64, im: f64 },

    #[error("argument outside the domain: {0}")]
    Domain(String),

    #[error("singular input: {0}")]
    Singularity(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("operation not supported for {0}")]
    Unsupported(String),

    #[error("empty sample")]
    EmptySample,

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("grid is not uniform: {0}")]
    NonUniformGrid(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Short machine-readable tag used in CLI error objects.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Pole { .. } => "pole",
            Error::Domain(_) => "domain",
            Error::Singularity(_) => "singularity",
            Error::InvalidParameter(_) => "invalid_parameter",
            Error::Unsupported(_) => "unsupported",
            Error::EmptySample => "empty_sample",
            Error::Parse { .. } => "parse",
            Error::NonUniformGrid(_) => "non_uniform_grid",
            Error::Degenerate(_) => "degenerate",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
            Error::Csv(_) => "csv",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
