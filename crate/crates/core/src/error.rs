use std::fmt;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// One validation finding, tied to the field that caused it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Issue {
    pub field: String,
    pub message: String,
}

impl Issue {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "`{}`: {}", self.field, self.message)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{origin}: parse error: {message}")]
    Parse { origin: String, message: String },

    #[error("{origin}: {}", join_issues(issues))]
    Invalid { origin: String, issues: Vec<Issue> },

    #[error("{origin}: line {line}: {message}")]
    Row {
        origin: String,
        line: u64,
        message: String,
    },

    #[error("scenario {scenario_id}: no rule-compliant option after {attempts} attempts")]
    Infeasible { scenario_id: String, attempts: u32 },

    #[error("unknown template `{0}`")]
    UnknownTemplate(String),

    #[error("template `{template_id}` needs placeholder `{key}`")]
    MissingPlaceholder { template_id: String, key: String },

    #[error("empty input: {0}")]
    Empty(&'static str),
}

impl Error {
    pub(crate) fn invalid(origin: impl Into<String>, issues: Vec<Issue>) -> Self {
        Error::Invalid {
            origin: origin.into(),
            issues,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Validation findings carried by this error, if any.
    pub fn issues(&self) -> &[Issue] {
        match self {
            Error::Invalid { issues, .. } => issues,
            _ => &[],
        }
    }
}

fn join_issues(issues: &[Issue]) -> String {
    issues
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

/// Errors raised while lexing, parsing or type-checking a rule predicate.
///
/// Positions are 0-based byte offsets into the predicate text.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PredicateError {
    #[error("lexical error at position {position}: {message}")]
    Lexical { position: usize, message: String },
    #[error("syntax error at position {position}: {message}")]
    Syntax { position: usize, message: String },
    #[error("unknown attribute `{name}` at position {position}")]
    UnknownAttribute { position: usize, name: String },
    #[error("type mismatch at position {position}: {message}")]
    TypeMismatch { position: usize, message: String },
}

impl PredicateError {
    pub fn position(&self) -> usize {
        match self {
            PredicateError::Lexical { position, .. }
            | PredicateError::Syntax { position, .. }
            | PredicateError::UnknownAttribute { position, .. }
            | PredicateError::TypeMismatch { position, .. } => *position,
        }
    }
}
