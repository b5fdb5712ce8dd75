use alloc::string::String;
use core::fmt;

/// Errors surfaced by the algorithmic core.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CoreError {
    /// A configuration value is outside its legal range.
    Config(String),
    /// An input (corpus, sentence, vector) violates a precondition.
    Input(String),
    /// An optimization model is malformed or cannot be solved as requested.
    Solver(String),
    /// Text parsing failed (LP format).
    Parse(String),
}

impl fmt::Display for CoreError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CoreError::Config(msg) => write!(f, "configuration error: {msg}"),
            CoreError::Input(msg) => write!(f, "input error: {msg}"),
            CoreError::Solver(msg) => write!(f, "solver error: {msg}"),
            CoreError::Parse(msg) => write!(f, "parse error: {msg}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for CoreError {}

pub type Result<T> = core::result::Result<T, CoreError>;

macro_rules! config_err {
    ($($arg:tt)*) => { $crate::error::CoreError::Config(alloc::format!($($arg)*)) };
}
macro_rules! input_err {
    ($($arg:tt)*) => { $crate::error::CoreError::Input(alloc::format!($($arg)*)) };
}
macro_rules! solver_err {
    ($($arg:tt)*) => { $crate::error::CoreError::Solver(alloc::format!($($arg)*)) };
}
macro_rules! parse_err {
    ($($arg:tt)*) => { $crate::error::CoreError::Parse(alloc::format!($($arg)*)) };
}
pub(crate) use config_err;
pub(crate) use input_err;
pub(crate) use parse_err;
pub(crate) use solver_err;
