use std::path::PathBuf;

/// Errors raised across the workbench.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid terrain spec: {0}")]
    InvalidSpec(String),

    #[error("path violates obstacle mask at step {step}, wheel {wheel} (cell {col},{row})")]
    PathViolatesMask {
        step: usize,
        wheel: usize,
        col: usize,
        row: usize,
    },

    #[error("path leaves the world at step {step}")]
    PathOutOfBounds { step: usize },

    #[error("invalid sensor pose: {0}")]
    InvalidPose(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("unknown configuration key `{0}`")]
    UnknownKey(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("backward called without a recorded forward tape")]
    MissingTape,

    #[error("cannot train: {0}")]
    CannotTrain(String),

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("start state lies outside the map")]
    InvalidStart,

    #[error("no feasible sample: every rollout cost is infinite")]
    NoFeasibleSample,

    #[error("parse error in {what} at line {line}: {msg}")]
    Parse {
        what: &'static str,
        line: usize,
        msg: String,
    },

    #[error("missing input file {0}")]
    MissingFile(PathBuf),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn parse(what: &'static str, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            what,
            line,
            msg: msg.into(),
        }
    }
}
