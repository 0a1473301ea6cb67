use serde::Serialize;
use thiserror::Error;

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("parse error in {context}: {message}")]
    Parse { context: String, message: String },
    #[error("invalid configuration: {}", .0.join("; "))]
    Validation(Vec<String>),
    #[error("record is incomplete: {0}")]
    IncompleteRecord(String),
    #[error("{command}: {source}")]
    Module {
        command: String,
        #[source]
        source: metavqt::Error,
    },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn parse(context: impl Into<String>, message: impl ToString) -> Self {
        CliError::Parse { context: context.into(), message: message.to_string() }
    }

    pub fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.display().to_string(), source }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Parse { .. } => "parse",
            CliError::Validation(_) => "validation",
            CliError::IncompleteRecord(_) => "incomplete_record",
            CliError::Module { .. } => "module",
            CliError::Io { .. } => "io",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse { .. } | CliError::Validation(_) => 2,
            _ => 1,
        }
    }

    /// Machine-readable form printed on failure.
    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Body<'a> {
            kind: &'a str,
            message: String,
            #[serde(skip_serializing_if = "Vec::is_empty")]
            problems: Vec<String>,
        }
        #[derive(Serialize)]
        struct Wrapper<'a> {
            error: Body<'a>,
        }
        let problems = match self {
            CliError::Validation(p) => p.clone(),
            _ => Vec::new(),
        };
        let w = Wrapper { error: Body { kind: self.kind(), message: self.to_string(), problems } };
        serde_json::to_string(&w).expect("plain strings serialize")
    }
}

/// Attaches the command name to a library error.
pub trait ModuleContext<T> {
    fn during(self, command: &str) -> CliResult<T>;
}

impl<T> ModuleContext<T> for metavqt::Result<T> {
    fn during(self, command: &str) -> CliResult<T> {
        self.map_err(|source| CliError::Module { command: command.to_string(), source })
    }
}
