use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("value {value} outside domain [{lower}, {upper}]")]
    Domain { value: f64, lower: f64, upper: f64 },

    #[error("relative error undefined for zero flow")]
    UndefinedError,

    #[error("duplicate variable name `{0}`")]
    DuplicateName(String),

    #[error("duplicate constraint tag `{0}`")]
    DuplicateTag(String),

    #[error("reference to undeclared variable #{0}")]
    DanglingReference(usize),

    #[error("invalid bounds for `{name}`: [{lower}, {upper}]")]
    InvalidBounds { name: String, lower: f64, upper: f64 },

    #[error("model is frozen")]
    Frozen,

    #[error("model must be frozen first")]
    NotFrozen,

    #[error("cannot serialize model: {0}")]
    Serialization(String),

    #[error("solution parse error at line {line}: {msg}")]
    SolutionParse { line: usize, msg: String },

    #[error("value {value} of `{name}` outside bounds [{lower}, {upper}]")]
    BoundViolation { name: String, value: f64, lower: f64, upper: f64 },

    #[error("variable `{0}` missing from solution")]
    MissingVariable(String),

    #[error("failed to launch solver `{cmd}`")]
    AdapterLaunch {
        cmd: String,
        #[source]
        source: std::io::Error,
    },

    #[error("solver timed out after {0} s")]
    Timeout(u64),

    #[error("solver failed: {0}")]
    Solver(String),

    #[error("invalid case: {0}")]
    Case(String),

    #[error("network is not radial: {0}")]
    NotRadial(String),

    #[error("sweep did not converge after {iterations} iterations (mismatch trace {trace:?})")]
    NoConvergence { iterations: usize, trace: Vec<f64> },

    #[error("i/o error on {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
