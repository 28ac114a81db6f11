use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the routing pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid coordinate: lat={lat}, lon={lon}")]
    InvalidCoordinate { lat: f64, lon: f64 },

    #[error("undefined bearing between coincident points")]
    UndefinedBearing,

    #[error("duplicate node id `{0}`")]
    DuplicateNode(String),

    #[error("unknown node id `{0}`")]
    UnknownNode(String),

    #[error("duplicate street between `{0}` and `{1}`")]
    DuplicateStreet(String, String),

    #[error("street `{0}` connects a node to itself")]
    SelfLoop(String),

    #[error("invalid street length {length} between `{from}` and `{to}`")]
    InvalidLength { from: String, to: String, length: f64 },

    #[error("node `{node}`: cannot assign compass action to edge towards `{to}` (bearing {bearing:.2}°)")]
    ActionCollision { node: String, to: String, bearing: f64 },

    #[error("{}:{line}: {message}", path.display())]
    Row {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("malformed file: {0}")]
    Format(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("no crimes available for density estimate")]
    NoCrimesForDensity,

    #[error("metric requires a non-empty crime list")]
    NoCrimes,

    #[error("path has no edges")]
    EmptyPath,

    #[error("vocabulary is empty")]
    EmptyVocabulary,

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("action mask allows no action")]
    EmptyMask,

    #[error("action {0} is masked out")]
    MaskedAction(crate::geo::CompassAction),

    #[error("non-finite gradient entry")]
    NonFiniteGradient,

    #[error("non-finite parameter after update")]
    NonFiniteParameter,

    #[error("no path between `{0}` and `{1}`")]
    Unreachable(String, String),

    #[error("start and target are the same node `{0}`")]
    SameEndpoints(String),

    #[error("empty path set")]
    EmptyPathSet,

    #[error("no node pairs at {0} hops")]
    NoPairs(usize),

    #[error("zero base value in column `{0}`")]
    ZeroBase(&'static str),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn io_err(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Error {
    let path = path.into();
    move |source| Error::Io { path, source }
}
