use std::fmt;

use thiserror::Error;

/// Position and expectation of a grammar violation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SyntaxError {
    /// Byte offset into the input.
    pub offset: usize,
    pub expected: String,
    pub found: String,
}

impl fmt::Display for SyntaxError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "syntax error at byte {}: expected {}, found {}",
            self.offset, self.expected, self.found
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SqlError {
    #[error("empty SQL text")]
    Empty,
    #[error("{0}")]
    Syntax(SyntaxError),
    #[error("unsupported construct {construct} at byte {offset}")]
    UnsupportedConstruct { offset: usize, construct: String },
    #[error("qualifier `{alias}` is not declared in FROM or JOIN")]
    UnresolvedAlias { alias: String },
}

impl SqlError {
    pub fn offset(&self) -> Option<usize> {
        match self {
            Self::Syntax(e) => Some(e.offset),
            Self::UnsupportedConstruct { offset, .. } => Some(*offset),
            _ => None,
        }
    }
}
