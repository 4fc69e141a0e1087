use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("format error at line {line}: {msg}")]
    Format { line: usize, msg: String },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    /// The interpolation system could not be solved at any admissible degree.
    #[error("model fit failed (condition estimate {condition:.3e}): {msg}")]
    FitFailure { condition: f64, msg: String },

    #[error("model denominator has a root at alpha = {alpha:.6e} inside the fit interval")]
    Pole { alpha: f64 },

    #[error("degenerate fit: interpolation residual {residual:.3e} exceeds tolerance")]
    DegenerateFit { residual: f64 },

    #[error("model evaluated at a pole (alpha = {alpha:.6e})")]
    PoleEvaluation { alpha: f64 },

    #[error("no solution on [{lo:.3e}, {hi:.3e}]: {msg}")]
    NoSolution { lo: f64, hi: f64, msg: String },

    #[error("value source cannot provide derivative of order {order}")]
    Capability { order: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short stable code used in experiment tables.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidArgument(_) => "ERR_INVALID_ARGUMENT",
            Error::Format { .. } => "ERR_FORMAT",
            Error::Validation(_) => "ERR_VALIDATION",
            Error::Numeric(_) => "ERR_NUMERIC",
            Error::Unsupported(_) => "ERR_UNSUPPORTED",
            Error::FitFailure { .. } => "ERR_FIT_FAILURE",
            Error::Pole { .. } => "ERR_POLE",
            Error::DegenerateFit { .. } => "ERR_DEGENERATE_FIT",
            Error::PoleEvaluation { .. } => "ERR_POLE_EVALUATION",
            Error::NoSolution { .. } => "ERR_NO_SOLUTION",
            Error::Capability { .. } => "ERR_CAPABILITY",
            Error::Config(_) => "ERR_CONFIG",
            Error::Io(_) => "ERR_IO",
            Error::Json(_) => "ERR_JSON",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
