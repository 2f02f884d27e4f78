use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{field}: {message}")]
    Usage { field: String, message: String },

    #[error(transparent)]
    Core(#[from] tracekit::Error),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("refusing to start: {needed} trials requested, budget is {budget} (raise max_trials)")]
    Budget { needed: u64, budget: u64 },
}

pub type Result<T> = std::result::Result<T, HarnessError>;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_RANGE: i32 = 3;
pub const EXIT_DIAGNOSTIC: i32 = 4;

impl HarnessError {
    pub fn usage(field: impl Into<String>, message: impl Into<String>) -> Self {
        HarnessError::Usage { field: field.into(), message: message.into() }
    }

    pub fn exit_code(&self) -> i32 {
        use tracekit::Error as E;
        match self {
            HarnessError::Usage { .. } | HarnessError::Budget { .. } => EXIT_USAGE,
            HarnessError::Core(E::Parameter(_)) => EXIT_USAGE,
            HarnessError::Core(E::Range(_) | E::Domain(_) | E::LengthCap { .. }) => EXIT_RANGE,
            HarnessError::Core(E::InversionUnstable { .. }) => EXIT_DIAGNOSTIC,
            HarnessError::Io { .. } => 1,
        }
    }
}

pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> HarnessError {
    let path = path.into();
    move |source| HarnessError::Io { path, source }
}
