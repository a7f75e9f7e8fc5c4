use std::path::{Path, PathBuf};

use serde::Serialize;

pub type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("{0}")]
    Config(String),
    /// A core module rejected its input.
    #[error("{message}")]
    Module {
        class: &'static str,
        message: String,
    },
}

#[derive(Serialize)]
struct Record<'a> {
    error: &'a str,
    message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    path: Option<String>,
}

impl CliError {
    pub fn io(path: &Path, e: impl std::fmt::Display) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            message: e.to_string(),
        }
    }

    pub fn module(class: &'static str, e: impl std::fmt::Display) -> Self {
        CliError::Module {
            class,
            message: e.to_string(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io { .. } | CliError::Config(_) => 2,
            CliError::Module { .. } => 1,
        }
    }

    pub fn class(&self) -> &'static str {
        match self {
            CliError::Io { .. } => "IoError",
            CliError::Config(_) => "ConfigError",
            CliError::Module { class, .. } => class,
        }
    }

    /// Single-line JSON error record.
    pub fn record(&self) -> String {
        let (message, path) = match self {
            CliError::Io { path, message } => (message.clone(), Some(path.display().to_string())),
            CliError::Config(m) | CliError::Module { message: m, .. } => (m.clone(), None),
        };
        serde_json::to_string(&Record {
            error: self.class(),
            message,
            path,
        })
        .expect("error record serializes")
    }
}

impl From<hiseg_core::dos::DosError> for CliError {
    fn from(e: hiseg_core::dos::DosError) -> Self {
        CliError::module(e.class(), e)
    }
}

impl From<hiseg_core::corpus::CorpusError> for CliError {
    fn from(e: hiseg_core::corpus::CorpusError) -> Self {
        CliError::module("CorpusError", e)
    }
}

impl From<hiseg_core::generative::GenError> for CliError {
    fn from(e: hiseg_core::generative::GenError) -> Self {
        CliError::module("GenerativeError", e)
    }
}

impl From<hiseg_core::topics::TopicError> for CliError {
    fn from(e: hiseg_core::topics::TopicError) -> Self {
        CliError::module("TopicError", e)
    }
}

impl From<hiseg_core::inference::InferError> for CliError {
    fn from(e: hiseg_core::inference::InferError) -> Self {
        CliError::module("InferenceError", e)
    }
}

impl From<hiseg_core::eval::EvalError> for CliError {
    fn from(e: hiseg_core::eval::EvalError) -> Self {
        CliError::module("EvalError", e)
    }
}
