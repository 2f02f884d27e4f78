use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A precondition on an argument was violated.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// A map was evaluated at (or numerically on top of) a pole.
    #[error("domain error: {0}")]
    Domain(String),

    /// The computation would leave double range or a documented size budget.
    #[error("numerical range exceeded: {0}")]
    Range(String),

    /// Triangular back-substitution produced a value not attributable to a bit.
    #[error("mean inversion unstable at position {position}: pre-rounding value {value}")]
    InversionUnstable { position: usize, value: f64 },

    /// An insertion trace grew past its hard length cap.
    #[error("insertion output exceeded the length cap of {cap} bits")]
    LengthCap { cap: usize },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn param<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Parameter(msg.into()))
}
