use std::fmt;

use wmalg_core::WmError;

/// Process exit codes.
pub mod code {
    pub const OK: u8 = 0;
    pub const VERIFY_FAILED: u8 = 1;
    pub const PARSE: u8 = 2;
    pub const OVERFLOW: u8 = 3;
    pub const MISMATCH: u8 = 4;
    pub const NOT_CERTIFIED: u8 = 5;
    pub const SINGULAR: u8 = 6;
    pub const BUDGET: u8 = 7;
    pub const IO: u8 = 8;
}

/// An error that terminates the command with a specific exit code.
#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn new(code: u8, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }

    /// Failure while reading an input file.
    pub fn load(path: &str, err: WmError) -> Self {
        let code = match err {
            WmError::Overflow { .. } => code::OVERFLOW,
            _ => code::PARSE,
        };
        Self::new(code, format!("{path}: {err}"))
    }

    pub fn io(path: &str, err: std::io::Error) -> Self {
        Self::new(code::IO, format!("{path}: {err}"))
    }
}

impl From<WmError> for CliError {
    fn from(err: WmError) -> Self {
        let code = match &err {
            WmError::Overflow { .. } | WmError::InvalidElement(_) => code::OVERFLOW,
            WmError::Shape(_) | WmError::UnsupportedAlgebra(_) => code::MISMATCH,
            WmError::NotCertified { .. } => code::NOT_CERTIFIED,
            WmError::NotQuasiInvertible { .. } => code::SINGULAR,
            WmError::Budget { .. } => code::BUDGET,
            WmError::Format(_)
            | WmError::DuplicateCoordinate { .. }
            | WmError::IndexDomain(_)
            | WmError::InvalidWeight(_)
            | WmError::Divergent { .. } => code::PARSE,
        };
        Self::new(code, err.to_string())
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.message)
    }
}

impl std::error::Error for CliError {}
