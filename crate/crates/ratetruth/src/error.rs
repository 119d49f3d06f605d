use std::path::PathBuf;

use crate::pgm::PgmError;

pub type Result<T, E = CliError> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad or inconsistent configuration, pointing at the offending field.
    #[error("config error in `{field}`: {msg}")]
    Config { field: String, msg: String },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    /// A data file that could not be read as the expected format.
    #[error("{}: {msg}", path.display())]
    Format { path: PathBuf, msg: String },
    #[error("{}: {source}", path.display())]
    Pgm {
        path: PathBuf,
        #[source]
        source: PgmError,
    },
    /// Solver or measure failure, reported as the core library words it.
    #[error(transparent)]
    Numeric(#[from] ratetruth_core::Error),
    /// The computation ran but a check it reports on failed.
    #[error("{0}")]
    Failed(String),
}

impl CliError {
    pub fn config(field: &str, msg: impl std::fmt::Display) -> Self {
        CliError::Config {
            field: field.to_string(),
            msg: msg.to_string(),
        }
    }

    pub fn format(path: impl Into<PathBuf>, msg: impl std::fmt::Display) -> Self {
        CliError::Format {
            path: path.into(),
            msg: msg.to_string(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    /// 1 for numeric or check failures, 2 for usage, config and input errors.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Numeric(_) | CliError::Failed(_) => 1,
            CliError::Config { .. } | CliError::Io { .. } | CliError::Format { .. } | CliError::Pgm { .. } => 2,
        }
    }
}

/// Attaches a config field name to a core error raised while building inputs.
pub(crate) trait FieldContext<T> {
    fn field(self, field: &str) -> Result<T>;
}

impl<T> FieldContext<T> for std::result::Result<T, ratetruth_core::Error> {
    fn field(self, field: &str) -> Result<T> {
        self.map_err(|e| CliError::config(field, e))
    }
}
