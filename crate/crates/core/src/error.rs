use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed json in {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("{file}: row {row}: {message}")]
    SchemaViolation {
        file: String,
        row: usize,
        message: String,
    },

    #[error("missing value for attribute atom {atom}")]
    MissingAttribute { atom: String },

    #[error("conflicting values for atom {atom}: {first} vs {second}")]
    ConflictingAtom {
        atom: String,
        first: String,
        second: String,
    },

    #[error("unknown functor `{0}`")]
    UnknownFunctor(String),

    #[error("unknown population `{0}`")]
    UnknownPopulation(String),

    #[error("unknown constant `{constant}` in population `{population}`")]
    UnknownConstant { population: String, constant: String },

    #[error("value `{value}` is not in the range of `{functor}`")]
    UnknownValue { functor: String, value: String },

    #[error("variable `{0}` is not bound by any literal")]
    UnknownVariable(String),

    #[error("ill-typed term: {0}")]
    Type(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("invalid model: {0}")]
    Model(String),

    #[error("node `{0}` is not in the model")]
    UnknownNode(String),

    #[error("conditional probability row undefined for {node} given {row}: zero count and zero pseudocount")]
    UndefinedRow { node: String, row: String },

    #[error("zero-probability feature instantiated: {0}")]
    ZeroProbabilityFeature(String),

    #[error("gibbs deadlock at {0}: every candidate value has probability zero")]
    Deadlock(String),

    #[error("empty population `{0}`")]
    EmptyPopulation(String),

    #[error("ground cycle detected through {0}")]
    GroundCycle(String),

    #[error("size limit exceeded: {0}")]
    TooLarge(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("internal error: {0}")]
    Internal(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by the caller's input rather than a fault in
    /// the engine.
    pub fn is_input_error(&self) -> bool {
        !matches!(self, Error::Internal(_))
    }
}
