use filamentlab_core::FilamentError;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] FilamentError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type CliResult<T> = std::result::Result<T, CliError>;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

impl CliError {
    pub fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    pub fn is_numerical(&self) -> bool {
        matches!(self, CliError::Core(e) if e.is_numerical())
    }

    pub fn exit_code(&self) -> i32 {
        if self.is_numerical() {
            EXIT_NUMERICAL
        } else {
            EXIT_VALIDATION
        }
    }

    pub fn residual(&self) -> Option<f64> {
        match self {
            CliError::Core(e) => e.residual(),
            _ => None,
        }
    }

    /// Single-line JSON for stderr.
    pub fn report(&self) -> ErrorReport {
        ErrorReport {
            status: if self.is_numerical() { "numerical" } else { "validation" },
            exit_code: self.exit_code(),
            reason: self.to_string().split_whitespace().collect::<Vec<_>>().join(" "),
            residual: self.residual(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ErrorReport {
    pub status: &'static str,
    pub exit_code: i32,
    pub reason: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub residual: Option<f64>,
}
