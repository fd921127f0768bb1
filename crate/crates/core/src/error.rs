use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("{path}: line {line}: {msg}")]
    BadRow {
        path: String,
        line: u64,
        msg: String,
    },

    #[error("degenerate data: {0}")]
    Degenerate(String),

    #[error("rank-deficient design, collinear terms: {}", .0.join(", "))]
    RankDeficient(Vec<String>),

    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("{}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: {source}", .path.display())]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("snapshot: {0}")]
    Snapshot(String),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn degenerate(msg: impl Into<String>) -> Self {
        Error::Degenerate(msg.into())
    }

    /// True for errors caused by the data rather than the setup
    /// (maps onto the "analysis infeasible" exit code).
    pub fn is_analysis_infeasible(&self) -> bool {
        matches!(
            self,
            Error::Degenerate(_) | Error::RankDeficient(_) | Error::NotPositiveDefinite(_)
        )
    }
}
