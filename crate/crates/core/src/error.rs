use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("generation produced a non-finite value for {variable}")]
    NonFinite { variable: String },

    #[error("model error: I - B is singular")]
    SingularModel,

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("invalid variable set: {0}")]
    InvalidVarSet(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("tested rank {r} out of range (must be < {max})")]
    RankOutOfRange { r: usize, max: usize },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("insufficient samples for HSIC: {0}")]
    InsufficientSamples(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Short machine-readable tag used by `--json-errors`.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidModel(_) => "invalid_model",
            Error::NonFinite { .. } => "non_finite",
            Error::SingularModel => "singular_model",
            Error::InvalidDataset(_) => "invalid_dataset",
            Error::InvalidVarSet(_) => "invalid_varset",
            Error::Degenerate(_) => "degenerate",
            Error::RankOutOfRange { .. } => "rank_out_of_range",
            Error::Precondition(_) => "precondition",
            Error::InsufficientSamples(_) => "insufficient_samples",
            Error::Parse { .. } => "parse",
            Error::Config(_) => "config",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
            Error::Csv(_) => "csv",
        }
    }
}
