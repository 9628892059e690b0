use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Input data violates a structural invariant.
    #[error("validation error: {0}")]
    Validation(String),

    #[error("unreachable loss {loss}: the loss floor here is {floor}")]
    UnreachableLoss { loss: f64, floor: f64 },

    #[error("unidentifiable: {0}")]
    Unidentifiable(String),

    #[error("fit failed: {0}")]
    FitFailure(String),

    #[error("no crossover: {0}")]
    NoCrossover(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("invalid allocation regime: {0}")]
    InvalidRegime(String),

    #[error("out of range: {0}")]
    OutOfRange(String),

    #[error("internal error: {0}")]
    Internal(String),
}

macro_rules! bail {
    ($kind:ident, $($arg:tt)*) => {
        return Err($crate::Error::$kind(alloc::format!($($arg)*)))
    };
}
pub(crate) use bail;
