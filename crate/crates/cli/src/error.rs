use std::path::PathBuf;

use focklens::FockError;
use serde_json::{json, Value};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("parse error{}: {message}{}", line_suffix(*.line), missing_suffix(.missing))]
    Parse {
        message: String,
        line: Option<usize>,
        missing: Vec<String>,
    },

    #[error("unknown key `{key}` for `{command}`{}", line_suffix(*.line))]
    UnknownKey {
        key: String,
        line: Option<usize>,
        command: String,
    },

    #[error("range violation: `{key}` {message}")]
    RangeViolation { key: String, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Table { path: PathBuf, message: String },

    #[error("{context}: {source}")]
    Simulation {
        context: String,
        #[source]
        source: FockError,
    },
}

fn line_suffix(line: Option<usize>) -> String {
    line.map(|l| format!(" (line {l})")).unwrap_or_default()
}

fn missing_suffix(missing: &[String]) -> String {
    if missing.is_empty() {
        String::new()
    } else {
        format!(": {}", missing.join(", "))
    }
}

impl HarnessError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            HarnessError::Parse { .. } => "ParseError",
            HarnessError::UnknownKey { .. } => "UnknownKey",
            HarnessError::RangeViolation { .. } => "RangeViolation",
            HarnessError::Io { .. } => "IoError",
            HarnessError::Table { .. } => "TableError",
            HarnessError::Simulation { source, .. } => match source {
                FockError::TailLeak { .. } => "TailLeak",
                FockError::OutOfWindow { .. } => "OutOfWindow",
                FockError::NoConvergence(_) => "NoConvergence",
                FockError::Domain(_) => "DomainError",
                FockError::Range(_) => "RangeError",
                FockError::JumpOverflow { .. } => "JumpOverflow",
            },
        }
    }

    /// Process exit status: 2 for configuration problems, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Parse { .. } | HarnessError::UnknownKey { .. } | HarnessError::RangeViolation { .. } => 2,
            _ => 1,
        }
    }

    /// Machine-readable form written next to the outputs and to stderr.
    pub fn record(&self) -> Value {
        let mut record = json!({
            "error": self.kind(),
            "message": self.to_string(),
            "exit_code": self.exit_code(),
        });
        let fields = record.as_object_mut().expect("object literal");
        match self {
            HarnessError::Parse { line, missing, .. } => {
                fields.insert("line".into(), json!(line));
                fields.insert("missing".into(), json!(missing));
            }
            HarnessError::UnknownKey { key, line, .. } => {
                fields.insert("key".into(), json!(key));
                fields.insert("line".into(), json!(line));
            }
            HarnessError::RangeViolation { key, .. } => {
                fields.insert("key".into(), json!(key));
            }
            HarnessError::Io { path, .. } | HarnessError::Table { path, .. } => {
                fields.insert("path".into(), json!(path));
            }
            HarnessError::Simulation { context, .. } => {
                fields.insert("context".into(), json!(context));
            }
        }
        record
    }
}

/// Attaches recipe context to simulation errors.
pub trait Context<T> {
    fn context(self, context: impl FnOnce() -> String) -> Result<T, HarnessError>;
}

impl<T> Context<T> for focklens::Result<T> {
    fn context(self, context: impl FnOnce() -> String) -> Result<T, HarnessError> {
        self.map_err(|source| HarnessError::Simulation {
            context: context(),
            source,
        })
    }
}
