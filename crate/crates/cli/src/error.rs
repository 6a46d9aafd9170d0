use std::path::{Path, PathBuf};

use serde_json::{json, Value};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] bscb_core::Error),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: {message}", path.display())]
    Parse { path: PathBuf, message: String },

    #[error("{0}")]
    Usage(String),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn parse(path: &Path, err: impl std::fmt::Display) -> Self {
        CliError::Parse {
            path: path.to_path_buf(),
            message: err.to_string(),
        }
    }

    fn kind(&self) -> &'static str {
        use bscb_core::Error as E;
        match self {
            CliError::Core(e) => match e {
                E::MissingColumn(_) | E::InvalidRow { .. } => "trace",
                E::Config(_) => "config",
                E::InvalidArgument(_) => "argument",
                E::Empty(_) => "empty_input",
                E::Format(_) | E::Json(_) | E::Csv(_) => "format",
                E::Io { .. } => "io",
            },
            CliError::Io { .. } => "io",
            CliError::Parse { .. } => "parse",
            CliError::Usage(_) => "usage",
        }
    }

    fn path(&self) -> Option<&Path> {
        match self {
            CliError::Core(bscb_core::Error::Io { path, .. }) | CliError::Io { path, .. } | CliError::Parse { path, .. } => {
                Some(path)
            }
            _ => None,
        }
    }

    /// `{"error": {"kind", "message", "path"?}}`
    pub fn to_json(&self) -> Value {
        let mut err = json!({ "kind": self.kind(), "message": self.to_string() });
        if let Some(p) = self.path() {
            err["path"] = json!(p.display().to_string());
        }
        json!({ "error": err })
    }
}
