use std::path::PathBuf;

use thiserror::Error;

use crate::geodata::FeatureError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("malformed input: {0}")]
    Malformed(String),

    #[error("{} invalid feature(s): {}", .0.len(), summarize_features(.0))]
    InvalidFeatures(Vec<FeatureError>),

    #[error("duplicate unit ids: {}", .0.join(", "))]
    DuplicateIds(Vec<String>),

    #[error("join produced no common units")]
    EmptyJoin,

    #[error("unknown variable `{0}`")]
    UnknownVariable(String),

    #[error("unknown demographic attribute `{0}`")]
    UnknownAttribute(String),

    #[error("unknown behavior `{0}`")]
    UnknownBehavior(String),

    #[error("group {0} matches no subgroup rows")]
    EmptyGroup(String),

    #[error("invalid model specification: {0}")]
    InvalidSpec(String),

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("too few usable units: need at least {needed}, have {have}")]
    TooFewUnits { needed: usize, have: usize },

    #[error("design matrix is rank deficient; collinear column(s): {}", .0.join(", "))]
    RankDeficient(Vec<String>),

    #[error("dense eigenvalue computation refused for n = {n} (capacity {max})")]
    Capacity { n: usize, max: usize },

    #[error("singular system: {0}")]
    Singular(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("statistic undefined: {0}")]
    Undefined(String),

    #[error("no finite AICc over the bandwidth range; try fewer variables")]
    NoFiniteBandwidth,

    #[error("{0}")]
    Stage(#[from] crate::service::StageError),

    #[error("unknown session `{0}`")]
    UnknownSession(String),
}

fn summarize_features(errors: &[FeatureError]) -> String {
    errors
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
