use std::path::PathBuf;

/// Errors surfaced by the simulator, the learners and the experiment harness.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A caller broke an operation's precondition (shape, range, arity).
    #[error("contract violation: {0}")]
    Contract(String),

    /// An operation was invoked in the wrong order, e.g. backward before forward.
    #[error("invalid state: {0}")]
    State(String),

    /// The environment rejected an action that breaks a problem constraint.
    #[error("constraint `{bound}` violated: {detail}")]
    Constraint { bound: &'static str, detail: String },

    /// Training diverged (non-finite loss or gradient).
    #[error("training error: {0}")]
    Training(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

macro_rules! contract {
    ($cond:expr, $($arg:tt)+) => {
        if !$cond {
            return Err($crate::error::Error::Contract(format!($($arg)+)));
        }
    };
}
pub(crate) use contract;
