use std::path::PathBuf;

/// Errors raised anywhere in the estimation pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}:{line}: {message}", path.display())]
    Parse { path: PathBuf, line: u64, message: String },

    #[error("schema mismatch in {}: {message}", path.display())]
    Schema { path: PathBuf, message: String },

    #[error("invalid input: {0}")]
    Validation(String),

    #[error("insufficient data: {0}")]
    Insufficient(String),

    #[error("rank-deficient design, collinear columns: {}", .0.join(", "))]
    RankDeficient(Vec<String>),

    #[error("solver did not converge after {iterations} iterations (duality gap {gap:.3e})")]
    NoConvergence { iterations: usize, gap: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::RankDeficient(_) | Error::NoConvergence { .. } | Error::Numerical(_)
        )
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
