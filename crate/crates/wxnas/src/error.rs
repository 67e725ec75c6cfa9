use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum AppError {
    #[error(transparent)]
    Core(#[from] wxnas_core::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("request failed after {attempts} attempt(s): {message}")]
    Network { attempts: u32, message: String },
    #[error("rate limited after {attempts} attempt(s); retry after {retry_after_secs} s")]
    RateLimited { attempts: u32, retry_after_secs: u64 },
    #[error("malformed archive response: {0}")]
    Data(String),
    #[error("invalid artifact: {0}")]
    Format(String),
    #[error("checksum mismatch: stored {stored:08x}, computed {computed:08x}")]
    Checksum { stored: u32, computed: u32 },
    #[error("unsupported format version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },
    #[error("configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl AppError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        AppError::Io { path: path.into(), source }
    }

    /// Whether retrying the same request later could succeed.
    pub fn is_retriable(&self) -> bool {
        matches!(self, AppError::Network { .. } | AppError::RateLimited { .. })
    }
}

pub type Result<T, E = AppError> = std::result::Result<T, E>;
