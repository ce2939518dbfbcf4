use std::path::PathBuf;

/// Errors raised anywhere in the pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("manifest row {row}: {msg}")]
    Manifest { row: usize, msg: String },
    #[error("tile file {path}: {msg}")]
    Tile { path: PathBuf, msg: String },
    #[error("duplicate sample id `{0}`")]
    DuplicateSample(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid split: {0}")]
    Split(String),
    #[error("estimator error: {0}")]
    Estimator(String),
    #[error("bundle error: {0}")]
    Bundle(String),
    #[error(
        "{skipped} of {total} constraint evaluations had degenerate groups; batch too small for the causal penalty"
    )]
    DegenerateGroups { skipped: usize, total: usize },
    #[error("{0}")]
    Invalid(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
