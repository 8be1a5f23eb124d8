use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error in {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("json error in {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("{file}: {message}")]
    Schema { file: String, message: String },

    #[error("duplicate {kind} `{key}`")]
    DuplicateKey { kind: &'static str, key: String },

    #[error("{file} line {line}: cell `{cell}` in column `{column}` is not a number or missing token")]
    BadCell {
        file: String,
        line: usize,
        column: String,
        cell: String,
    },

    #[error("unknown variable `{0}`")]
    UnknownVariable(String),

    #[error("unknown region `{0}`")]
    UnknownRegion(String),

    #[error("adjacency self-loop on region `{0}`")]
    SelfLoop(String),

    #[error("geometry error for feature {feature}: {message}")]
    Geometry { feature: String, message: String },

    #[error("variable `{0}` has no observed values; imputation cannot resolve it")]
    Unimputable(String),

    #[error("missing values remain in variable `{0}`")]
    MissingValues(String),

    #[error("degenerate vector ({context}): zero variance")]
    Degenerate { context: String },

    #[error("vector too short ({context}): need at least {needed}, got {got}")]
    TooShort {
        context: String,
        needed: usize,
        got: usize,
    },

    #[error("negative value {value} in `{context}` cannot be log-transformed")]
    NegativeLog { context: String, value: f64 },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("Jacobi eigensolver did not converge in {sweeps} sweeps (off-diagonal norm {off_norm:e})")]
    NoConvergence { sweeps: usize, off_norm: f64 },

    #[error("no component meets the retention rule ({0})")]
    NothingRetained(String),

    #[error("invalid k = {k} for {n} points")]
    InvalidK { k: usize, n: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("missing intermediate `{path}` (run step `{needed_step}` first)")]
    MissingIntermediate { path: PathBuf, needed_step: String },

    #[error("step `{step}` failed: {source}")]
    Step {
        step: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn csv(path: impl Into<PathBuf>, source: csv::Error) -> Self {
        Error::Csv {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(path: impl Into<PathBuf>, source: serde_json::Error) -> Self {
        Error::Json {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn schema(file: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Schema {
            file: file.into(),
            message: message.into(),
        }
    }

    pub(crate) fn in_step(self, step: &str) -> Self {
        Error::Step {
            step: step.to_string(),
            source: Box::new(self),
        }
    }
}
