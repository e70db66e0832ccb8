use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum LabError {
    #[error("unknown experiment `{0}`; run `mixpred list` for the registry")]
    UnknownExperiment(String),

    #[error("measure spec `{spec}`: {reason}")]
    Spec { spec: String, reason: String },

    #[error("config: {0}")]
    Config(String),

    #[error("experiment `{0}` is stochastic and needs a seed (set `seed` in [experiment] or pass --seed)")]
    MissingSeed(String),

    #[error("resource cap `{cap}` exceeded: need {needed}, limit {limit}")]
    Cap { cap: &'static str, needed: u128, limit: u128 },

    #[error(transparent)]
    Core(#[from] mixpred::Error),

    #[error("i/o on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

pub type LabResult<T> = std::result::Result<T, LabError>;

impl LabError {
    pub(crate) fn spec(spec: &str, reason: impl Into<String>) -> Self {
        LabError::Spec { spec: spec.to_string(), reason: reason.into() }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        LabError::Io { path: path.into(), source }
    }
}
