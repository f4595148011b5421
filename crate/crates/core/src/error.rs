use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure surfaced by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration: dimension mismatches, bad variances, bad levels.
    #[error("configuration error: {0}")]
    Config(String),

    /// Input outside the support of a likelihood (e.g. a negative Poisson count).
    #[error("domain error: {0}")]
    Domain(String),

    /// A numerical routine failed (non-finite objective, factorization, underflow).
    #[error("numeric failure in {module}::{operation}: {detail}")]
    Numeric {
        module: &'static str,
        operation: &'static str,
        detail: String,
    },

    /// A configuration key nobody recognizes.
    #[error("unknown configuration key '{0}'")]
    UnknownKey(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    /// CSV ingestion failure with its location. Rows are 1-based data rows
    /// (the header is row 0).
    #[error("ingestion error at row {row}, column '{column}': {message}")]
    Ingest {
        row: usize,
        column: String,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn numeric(module: &'static str, operation: &'static str, detail: impl Into<String>) -> Self {
        Error::Numeric {
            module,
            operation,
            detail: detail.into(),
        }
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    /// Appends `ctx` to the message of message-carrying variants.
    pub fn context(self, ctx: impl std::fmt::Display) -> Self {
        match self {
            Error::Numeric {
                module,
                operation,
                detail,
            } => Error::Numeric {
                module,
                operation,
                detail: format!("{detail} [{ctx}]"),
            },
            Error::Config(m) => Error::Config(format!("{m} [{ctx}]")),
            Error::Domain(m) => Error::Domain(format!("{m} [{ctx}]")),
            Error::Unsupported(m) => Error::Unsupported(format!("{m} [{ctx}]")),
            other => other,
        }
    }
}
