use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error(transparent)]
    Core(#[from] levelcg_core::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    /// 1-based line and column of the offending cell.
    #[error("parse error at row {row}, column {col}: {msg}")]
    Parse { row: u64, col: usize, msg: String },
    #[error("no data rows")]
    EmptyData,
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl BenchError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        BenchError::Io { path: path.into(), source }
    }

    /// Process exit code: 2 for solver failures, 3 for config, parse and IO
    /// problems.
    pub fn exit_code(&self) -> i32 {
        match self {
            BenchError::Core(_) => 2,
            _ => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, BenchError>;
