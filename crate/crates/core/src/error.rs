use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("input shape mismatch: {0}")]
    InputShape(String),

    #[error("empty input: {0}")]
    EmptySet(&'static str),

    #[error("degenerate input: {0}")]
    DegenerateInput(&'static str),

    #[error("training diverged: {0}")]
    TrainingDivergence(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("window cache invalid: expected step {expected}, got {got}")]
    CacheInvalid { expected: usize, got: usize },

    #[error("infeasible request: {0}")]
    Infeasible(String),

    #[error("missing artifact {path}; run stage `{stage}` first")]
    Dependency { stage: &'static str, path: PathBuf },

    #[error("internal invariant violated: {0}")]
    Invariant(String),

    #[error("malformed trace: {0}")]
    Trace(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Stable machine-readable name, used by the CLI error JSON and the C API.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InputShape(_) => "input_shape",
            Error::EmptySet(_) => "empty_set",
            Error::DegenerateInput(_) => "degenerate_input",
            Error::TrainingDivergence(_) => "training_divergence",
            Error::Config(_) => "config",
            Error::CacheInvalid { .. } => "cache_invalid",
            Error::Infeasible(_) => "infeasible",
            Error::Dependency { .. } => "dependency",
            Error::Invariant(_) => "invariant",
            Error::Trace(_) => "trace",
            Error::Io { .. } => "io",
            Error::Json(_) => "json",
        }
    }
}
