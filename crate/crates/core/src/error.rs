use std::path::PathBuf;

use crate::forge::AttackKind;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("cannot parse message {source_id}: {reason}")]
    Parse { source_id: String, reason: String },

    #[error("no parseable sender address in {0}")]
    MissingSender(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("no message in {0} could be parsed")]
    EmptyCorpus(PathBuf),

    #[error("donor is already from {0}")]
    SameSender(String),

    #[error("no sender in the pool shares the domain of {0}")]
    NoDomainPeer(String),

    #[error("{0} is already a recipient of the donor email")]
    SameRecipient(String),

    #[error("donor email {0} has no To field")]
    MissingRecipient(String),

    #[error("cannot build a {attack} test set of {wanted} pairs: {reason}")]
    InsufficientCorpus {
        attack: AttackKind,
        wanted: usize,
        reason: String,
    },

    #[error("feature subset is empty")]
    EmptySubset,

    #[error("{vectors} vectors but {labels} labels")]
    LengthMismatch { vectors: usize, labels: usize },

    #[error("k = {k} exceeds the {available} training vectors")]
    KTooLarge { k: usize, available: usize },

    #[error("query has dimension {got}, model expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("every raw feature is already in the subset")]
    ExhaustedActions,

    #[error("no feature earned a positive average reward; raise rounds or epsilon")]
    EmptyResult,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("confusion counts are all zero")]
    EmptyCounts,

    #[error("test set lacks {0} examples; rate is undefined")]
    DegenerateClass(&'static str),

    #[error("data has rank {rank}; at least one non-zero principal direction is required")]
    DegenerateData { rank: usize },

    #[error("artifact mismatch: {0}")]
    ArtifactMismatch(String),

    #[error("malformed artifact {path}, line {line}: {reason}")]
    Artifact {
        path: PathBuf,
        line: usize,
        reason: String,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
