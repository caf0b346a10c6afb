//! Error types shared by the parser and the interpreter.

use thiserror::Error;

/// Position of a token in a source file, 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Pos {
    pub line: u32,
    pub col: u32,
}

impl std::fmt::Display for Pos {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Error)]
pub enum ParseError {
    #[error("{file}:{pos}: {message}")]
    Syntax {
        file: String,
        pos: Pos,
        message: String,
    },
    /// Recognized syntax that the test subset deliberately rejects
    /// (deep nesting, assignments in tests, reserved identifiers, ...).
    #[error("{file}:{pos}: unsupported construct: {message}")]
    Unsupported {
        file: String,
        pos: Pos,
        message: String,
    },
}

impl ParseError {
    pub fn file(&self) -> &str {
        match self {
            ParseError::Syntax { file, .. } | ParseError::Unsupported { file, .. } => file,
        }
    }
}

/// Runtime failure of a single evaluation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LangError {
    /// `throw` executed by program code.
    Thrown { message: String },
    /// Violation detected by the runtime itself (bad index, null receiver,
    /// unknown name, arity mismatch, overflow, division by zero, ...).
    Runtime { message: String },
    /// A check-framework assertion did not hold (check mode only).
    AssertionFailed { message: String },
    /// The per-test step budget was exhausted.
    StepLimit,
    /// The per-test wall-clock budget was exhausted.
    WallClock,
}

impl LangError {
    /// Message text as observed by the harness (exception message semantics).
    pub fn message(&self) -> String {
        match self {
            LangError::Thrown { message } | LangError::Runtime { message } => message.clone(),
            LangError::AssertionFailed { message } => message.clone(),
            LangError::StepLimit => "step budget exhausted".to_string(),
            LangError::WallClock => "wall clock budget exhausted".to_string(),
        }
    }
}

impl std::fmt::Display for LangError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            LangError::Thrown { message } => write!(f, "thrown: {message}"),
            LangError::Runtime { message } => write!(f, "runtime error: {message}"),
            LangError::AssertionFailed { message } => write!(f, "assertion failed: {message}"),
            LangError::StepLimit => write!(f, "step budget exhausted"),
            LangError::WallClock => write!(f, "wall clock budget exhausted"),
        }
    }
}
