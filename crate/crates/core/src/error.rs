use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed EDF: {0}")]
    Edf(String),

    #[error("malformed CSV at line {line}: {msg}")]
    Csv { line: usize, msg: String },

    #[error("invalid recording: {0}")]
    Recording(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("zero denominator in {0}")]
    ZeroDenominator(&'static str),

    #[error("training data is missing class {0}")]
    SingleClass(u8),

    #[error("model expects {expected}, got {found}")]
    ModelInputMismatch { expected: String, found: String },

    #[error("cross-validation leakage: {0}")]
    Leakage(String),

    #[error("unknown site {0:?}")]
    UnknownSite(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("serialization: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// Stable machine-readable identifier, used by the CLI's error JSON.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::Edf(_) => "edf_format",
            Error::Csv { .. } => "csv_format",
            Error::Recording(_) => "invalid_recording",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::Degenerate(_) => "degenerate_input",
            Error::ZeroDenominator(_) => "zero_denominator",
            Error::SingleClass(_) => "single_class",
            Error::ModelInputMismatch { .. } => "model_input_mismatch",
            Error::Leakage(_) => "cv_leakage",
            Error::UnknownSite(_) => "unknown_site",
            Error::Config(_) => "config",
            Error::Json(_) => "json",
        }
    }
}
