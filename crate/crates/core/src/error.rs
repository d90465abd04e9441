use std::path::Path;

use thiserror::Error;

use crate::analysis::AnalysisError;
use crate::config::ConfigError;
use crate::embedding::EmbeddingError;
use crate::kg::KgError;
use crate::neighborhood::NeighborhoodError;
use crate::rank_metrics::MetricsError;
use crate::rbo::RboError;
use crate::similarity::SimilarityError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Graph(#[from] KgError),
    #[error(transparent)]
    Neighborhood(#[from] NeighborhoodError),
    #[error(transparent)]
    Similarity(#[from] SimilarityError),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error(transparent)]
    Rbo(#[from] RboError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Data(String),
    #[error("internal invariant violated: {0}")]
    Invariant(String),
}

impl Error {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Error::Io {
            path: path.display().to_string(),
            source,
        }
    }

    /// Wraps an error with the file it came from.
    pub fn in_file(self, path: &Path) -> Self {
        match self {
            Error::Io { .. } | Error::Config(_) | Error::Invariant(_) => self,
            other => Error::Data(format!("{}: {other}", path.display())),
        }
    }

    /// Process exit code: 1 usage/config, 2 data, 3 internal invariant.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 1,
            Error::Invariant(_) => 3,
            _ => 2,
        }
    }
}
