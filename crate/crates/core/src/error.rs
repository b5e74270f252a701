use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    /// Two sequences were compared without first being aligned to a common id set.
    #[error("sequence domain mismatch: {0}")]
    SequenceDomain(String),

    #[error("insufficient AP overlap: {common} common ids, need at least {required}")]
    InsufficientOverlap { common: usize, required: usize },

    #[error("similarity undefined: {0}")]
    UndefinedSimilarity(String),

    #[error("scan skipped: {readings} readings, need at least {required}")]
    ScanSkipped { readings: usize, required: usize },

    #[error("malformed log{}: {msg}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    MalformedLog { line: Option<usize>, msg: String },

    #[error("unknown sweep parameter `{0}`")]
    UnknownParameter(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("toml: {0}")]
    Toml(#[from] toml::de::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn malformed(msg: impl Into<String>) -> Self {
        Error::MalformedLog {
            line: None,
            msg: msg.into(),
        }
    }

    /// Short machine-readable tag, used by the CLI's error line.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Config(_) => "config",
            Error::SequenceDomain(_) => "sequence_domain",
            Error::InsufficientOverlap { .. } => "insufficient_overlap",
            Error::UndefinedSimilarity(_) => "undefined_similarity",
            Error::ScanSkipped { .. } => "scan_skipped",
            Error::MalformedLog { .. } => "malformed_log",
            Error::UnknownParameter(_) => "unknown_parameter",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
            Error::Toml(_) => "toml",
        }
    }
}
