use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("row {row}, column `{column}`: {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },
    #[error("schema: {0}")]
    Schema(String),
    #[error("no rows")]
    NoRows,
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("infeasible split for agent `{agent}`: {message}")]
    InfeasibleSplit { agent: String, message: String },
    #[error("singular system: {0}")]
    Singular(String),
    #[error("empty region")]
    EmptyRegion,
    #[error("dimension mismatch: expected {expected} features, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("outcome score {score} at row {row} is outside [0, 1]")]
    ScoreOutOfRange { row: usize, score: f64 },
    #[error("AUC undefined: truth labels contain a single class")]
    SingleClass,
    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },
}

/// Coarse failure class, used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Computation,
}

impl Error {
    pub fn context(self, context: impl Into<String>) -> Error {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Context { source, .. } => source.kind(),
            Error::Io { .. } | Error::Csv(_) | Error::Parse { .. } | Error::NoRows => ErrorKind::Data,
            Error::Schema(_) | Error::InvalidInput(_) => ErrorKind::Config,
            Error::InfeasibleSplit { .. } => ErrorKind::Data,
            Error::Json(_) => ErrorKind::Data,
            Error::Singular(_)
            | Error::EmptyRegion
            | Error::DimensionMismatch { .. }
            | Error::ScoreOutOfRange { .. }
            | Error::SingleClass => ErrorKind::Computation,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Error {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
