use alloc::string::String;

/// Errors raised by the library.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("model specification error: {0}")]
    ModelSpec(String),

    #[error("oracle evaluation failed at t={t}: {message}")]
    Oracle { t: f64, message: String },

    #[error("non-finite {quantity} on path {path} at step {step} (coordinate {coordinate})")]
    NonFinite {
        quantity: &'static str,
        path: usize,
        step: usize,
        coordinate: usize,
    },

    #[error("unsupported mode: {0}")]
    Unsupported(String),
}

pub type Result<T> = core::result::Result<T, Error>;

macro_rules! invalid {
    ($($arg:tt)*) => { $crate::error::Error::InvalidInput(alloc::format!($($arg)*)) };
}

macro_rules! domain {
    ($($arg:tt)*) => { $crate::error::Error::Domain(alloc::format!($($arg)*)) };
}

pub(crate) use domain;
pub(crate) use invalid;
