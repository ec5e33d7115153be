use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("file not found: {}", .0.display())]
    MissingFile(PathBuf),

    #[error("{what} not found: {} (run `aucap {producer}` first)", .path.display())]
    MissingArtifact {
        what: &'static str,
        path: PathBuf,
        producer: &'static str,
    },

    #[error("output directory is in use by another run: {} exists (delete it if no run is active)", .0.display())]
    Locked(PathBuf),

    #[error("malformed WAV header in {}: {reason}", .path.display())]
    MalformedWav { path: PathBuf, reason: String },

    #[error("unsupported audio encoding in {}: {reason}", .path.display())]
    UnsupportedEncoding { path: PathBuf, reason: String },

    #[error("corrupt header: {0}")]
    CorruptHeader(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("caption is empty after cleaning: {0:?}")]
    EmptyCaption(String),

    #[error("index {index} out of range for vocabulary of size {size}")]
    IndexOutOfRange { index: usize, size: usize },

    #[error("dataset error: {0}")]
    Dataset(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("{kind} hash mismatch: checkpoint has {expected}, supplied {found}")]
    HashMismatch {
        kind: &'static str,
        expected: String,
        found: String,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("optimizer step requested before backward pass")]
    StepBeforeBackward,

    #[error("{0}")]
    Metric(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Coarse class used for the CLI's `error[...]` prefix and exit code.
    pub fn category(&self) -> &'static str {
        use Error::*;
        match self {
            MissingFile(_) | MissingArtifact { .. } => "missing",
            MalformedWav { .. } | UnsupportedEncoding { .. } | CorruptHeader(_) | EmptyCaption(_) | InvalidInput(_)
            | Dataset(_) | Metric(_) | Csv(_) => "input",
            Checkpoint(_) | HashMismatch { .. } => "checkpoint",
            Config(_) => "config",
            Locked(_) => "locked",
            Io(_) | Json(_) => "io",
            DimensionMismatch { .. } | Shape(_) | NonFinite(_) | IndexOutOfRange { .. } | StepBeforeBackward => {
                "runtime"
            }
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.category() {
            "config" => 2,
            "missing" => 3,
            "input" => 4,
            "checkpoint" => 5,
            "locked" => 6,
            "io" => 7,
            _ => 1,
        }
    }
}
