//! Error type shared by all core modules.

use alloc::string::String;
use core::fmt;

/// Errors surfaced by core operations.
///
/// Variants map onto the harness exit-code classes: configuration problems,
/// data problems, shape mismatches (programmer error at API boundaries that
/// take caller-provided buffers), numeric failures, and solver capability
/// limits.
#[derive(Debug, Clone, PartialEq)]
pub enum CoreError {
    /// Invalid static configuration (dims, ranges, empty required lists).
    Config(String),
    /// Dataset or buffer does not meet an operation's preconditions.
    Data(String),
    /// Runtime dimension mismatch between values that must agree.
    Shape { expected: usize, got: usize, what: &'static str },
    /// Non-finite value where a finite one is required.
    Numeric(String),
    /// Problem instance exceeds a documented solver limit.
    Capability(String),
    /// The QP is infeasible even with free slack; names the offending box rows.
    Infeasible(String),
}

impl fmt::Display for CoreError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CoreError::Config(msg) => write!(f, "configuration error: {msg}"),
            CoreError::Data(msg) => write!(f, "data error: {msg}"),
            CoreError::Shape { expected, got, what } => {
                write!(f, "shape error: {what} expected {expected}, got {got}")
            }
            CoreError::Numeric(msg) => write!(f, "numeric error: {msg}"),
            CoreError::Capability(msg) => write!(f, "capability error: {msg}"),
            CoreError::Infeasible(msg) => write!(f, "infeasible: {msg}"),
        }
    }
}

impl core::error::Error for CoreError {}

pub type Result<T> = core::result::Result<T, CoreError>;

/// Checks a slice length against an expected dimension.
pub fn check_dim(slice_len: usize, expected: usize, what: &'static str) -> Result<()> {
    if slice_len != expected {
        Err(CoreError::Shape { expected, got: slice_len, what })
    } else {
        Ok(())
    }
}
