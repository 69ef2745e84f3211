use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("schema error: missing column `{column}`")]
    Schema { column: String },

    #[error("row {row}: {message}")]
    Row { row: usize, message: String },

    #[error("csv parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },

    #[error("balance error: {0}")]
    Balance(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("vocabulary is empty: no training document produced a token")]
    EmptyVocabulary,

    #[error("document-term matrix is empty: {0}")]
    EmptyMatrix(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("pooled covariance is singular even with ridge {ridge:e}")]
    Singular { ridge: f64 },

    #[error("{what} did not converge (residual {residual:e})")]
    Convergence { what: String, residual: f64 },

    #[error("format error at line {line}: {message}")]
    Format { line: usize, message: String },

    #[error("corrupt input: {0}")]
    Corruption(String),

    #[error("stale forward cache: {0}")]
    Cache(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("training diverged at epoch {epoch}, batch {batch}: loss {loss}")]
    Divergence { epoch: usize, batch: usize, loss: f64 },

    #[error("perplexity calibration failed for point {point}")]
    Calibration { point: usize },

    #[error("repetition {repetition}: {source}")]
    Repetition {
        repetition: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short machine-readable category.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Schema { .. } => "schema",
            Error::Row { .. } => "row",
            Error::Parse { .. } => "parse",
            Error::Balance(_) => "balance",
            Error::Argument(_) => "argument",
            Error::EmptyVocabulary => "empty_vocabulary",
            Error::EmptyMatrix(_) => "empty_matrix",
            Error::Dimension(_) => "dimension",
            Error::Numeric(_) => "numeric",
            Error::DegenerateFit(_) => "degenerate_fit",
            Error::Singular { .. } => "singular",
            Error::Convergence { .. } => "convergence",
            Error::Format { .. } => "format",
            Error::Corruption(_) => "corruption",
            Error::Cache(_) => "cache",
            Error::Config(_) => "config",
            Error::Divergence { .. } => "divergence",
            Error::Calibration { .. } => "calibration",
            Error::Repetition { source, .. } => source.kind(),
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }

    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }

    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }
}
