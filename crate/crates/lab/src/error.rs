use std::path::PathBuf;

/// Process exit codes of the `polylab` binary.
pub mod exit {
    pub const OK: i32 = 0;
    pub const CHECK_FAILED: i32 = 1;
    pub const CONFIG: i32 = 2;
    pub const DIVERGED: i32 = 3;
}

#[derive(Debug, thiserror::Error)]
pub enum LabError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("run {cell} diverged at step {step}")]
    Diverged { cell: String, step: u64 },
    #[error("{cell}: {source}")]
    Model {
        cell: String,
        #[source]
        source: polylab_core::Error,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("{path}: malformed file: {reason}")]
    Format { path: PathBuf, reason: String },
    #[error("{failed} of {total} checks failed")]
    ChecksFailed { failed: usize, total: usize },
}

pub type Result<T> = std::result::Result<T, LabError>;

impl LabError {
    pub fn config(msg: impl Into<String>) -> Self {
        LabError::Config(msg.into())
    }

    /// Wraps a model error raised while running `cell`.
    pub fn from_model(cell: &str, e: polylab_core::Error) -> Self {
        match e {
            polylab_core::Error::Diverged { step } => LabError::Diverged { cell: cell.to_string(), step },
            polylab_core::Error::NonFinite => LabError::Diverged { cell: cell.to_string(), step: 0 },
            polylab_core::Error::InvalidConfig(msg) => LabError::Config(format!("{cell}: {msg}")),
            source => LabError::Model { cell: cell.to_string(), source },
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        LabError::Io { path: path.into(), source }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            LabError::ChecksFailed { .. } => exit::CHECK_FAILED,
            LabError::Diverged { .. } => exit::DIVERGED,
            // Unwritable output directories count as configuration problems.
            LabError::Config(_) | LabError::Model { .. } | LabError::Io { .. } | LabError::Csv { .. } | LabError::Format { .. } => {
                exit::CONFIG
            }
        }
    }
}
