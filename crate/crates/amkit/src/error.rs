use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("graph is not acyclic: {0}")]
    Cyclic(String),

    #[error("matrix factorization failed: {0}")]
    Factorization(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("solver did not converge: {0}")]
    NonConvergence(String),

    #[error("unsupported operation: {0}")]
    Capability(String),

    #[error("imputation failed: {0}")]
    Imputation(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("parse error at {path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
