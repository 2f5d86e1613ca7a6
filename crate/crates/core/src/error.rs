use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    Dimension {
        context: String,
        expected: String,
        actual: String,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("task {0} is not registered; call register_task first")]
    UnregisteredTask(usize),

    #[error("task index {got} is out of order; expected {expected}")]
    TaskOrder { expected: usize, got: usize },

    #[error("metric {metric} is undefined: {reason}")]
    UndefinedMetric {
        metric: &'static str,
        reason: String,
    },

    #[error("malformed {kind} file {path:?}: {reason}")]
    Parse {
        kind: &'static str,
        path: PathBuf,
        reason: String,
    },

    #[error("unsupported split {0:?}")]
    UnsupportedSplit(String),

    #[error("{0}")]
    Data(String),

    #[error("I/O error on {path:?}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("trial {trial}, task {task}: {source}")]
    Trial {
        trial: usize,
        task: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn dim(
        context: impl Into<String>,
        expected: impl std::fmt::Debug,
        actual: impl std::fmt::Debug,
    ) -> Self {
        Error::Dimension {
            context: context.into(),
            expected: format!("{expected:?}"),
            actual: format!("{actual:?}"),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
