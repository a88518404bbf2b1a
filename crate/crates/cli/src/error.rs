use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error at '{key}': {message}")]
    Config { key: String, message: String },
    #[error("solver error: {0}")]
    Solver(#[from] wbeuler::Error),
    #[error("i/o error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub fn config(key: &str, message: String) -> Self {
        CliError::Config {
            key: key.to_string(),
            message,
        }
    }

    pub fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    /// Process exit status for this error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } => 2,
            CliError::Solver(_) => 3,
            CliError::Io { .. } | CliError::Json(_) => 4,
        }
    }
}
