use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("duplicate level `{0}`")]
    DuplicateLevel(String),
    #[error("empty level name")]
    EmptyLevelName,
    #[error("edge endpoint `{0}` is not a declared level")]
    UnknownEndpoint(String),
    #[error("self-loop on level `{0}`")]
    SelfLoop(String),
    #[error("graph `{0}` is disconnected")]
    DisconnectedGraph(String),
    #[error("graph has {0} levels; at most {max} are supported", max = crate::graph::MAX_LEVELS)]
    TooManyLevels(usize),
    #[error("invalid dimensions for builtin graph: {0}")]
    InvalidDimensions(String),
    #[error("unrecognized graph spec `{0}`")]
    InvalidGraphSpec(String),
    #[error("level id {0} is out of range")]
    OutOfRangeId(usize),
    #[error("induced subgraph is disconnected")]
    DisconnectedInduced,

    #[error("level set is not a subset of the terrain universe")]
    NotASubset,
    #[error("restriction target must be a proper subset with at least two levels")]
    NotProperSubset,
    #[error("partition does not cover the expected universe")]
    WrongUniverse,
    #[error("invalid terrain: {0}")]
    InvalidTerrain(String),
    #[error("a universe with a single level has no bipartitions")]
    SingletonUniverse,
    #[error("explicit terrain universe has {0} levels; at most {max} are supported", max = crate::enumerate::MAX_EXPLICIT_LEVELS)]
    UniverseTooLarge(usize),

    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("row {row}: unknown level `{value}` for feature `{feature}`")]
    UnknownLevel {
        row: usize,
        feature: String,
        value: String,
    },
    #[error("row {row}: missing value in column `{column}`")]
    MissingValue { row: usize, column: String },
    #[error("row {row}: target value `{value}` is not 0 or 1")]
    NonBinaryTarget { row: usize, value: String },
    #[error("row {row}: cannot parse `{value}` as a number in column `{column}`")]
    ParseNumber {
        row: usize,
        column: String,
        value: String,
    },
    #[error("column has a single distinct value")]
    ConstantColumn,
    #[error("invalid schema: {0}")]
    InvalidSchema(String),
    #[error("train/test split leaves one side empty")]
    EmptySplit,

    #[error("dataset has no rows")]
    EmptyDataset,
    #[error("targets have length {targets}, dataset has {rows} rows")]
    MisalignedTargets { targets: usize, rows: usize },
    #[error("row {row}: level `{value}` of feature `{feature}` is unknown to the model")]
    UnknownLevelAtPredict {
        row: usize,
        feature: String,
        value: String,
    },
    #[error("invalid parameter: {0}")]
    InvalidParams(String),
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("invalid model file: {0}")]
    InvalidModel(String),
    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn io_err(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Error {
    let path = path.into();
    move |source| Error::Io { path, source }
}
