use thiserror::Error;

/// Errors surfaced by the experiment harness.
#[derive(Debug, Error)]
pub enum CliError {
    /// A configuration key is unknown, malformed, or inconsistent with the
    /// chosen experiment.
    #[error("config field `{field}`: {message}")]
    Config { field: String, message: String },

    /// A data file failed to parse; `line` is 1-based.
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Core(#[from] grouse_core::Error),
}

impl CliError {
    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        CliError::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        CliError::Io {
            context: context.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
