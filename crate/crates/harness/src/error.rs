use gof_core::GofError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("input data error: {0}")]
    Input(String),

    #[error("internal error: {0}")]
    Internal(String),

    #[error("cannot write {path}: {source}")]
    Write {
        path: String,
        source: std::io::Error,
    },
}

impl HarnessError {
    /// Process exit code: 2 configuration, 3 input data, 4 internal.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 2,
            HarnessError::Input(_) => 3,
            HarnessError::Internal(_) | HarnessError::Write { .. } => 4,
        }
    }

    pub(crate) fn write(path: &std::path::Path, source: std::io::Error) -> Self {
        HarnessError::Write {
            path: path.display().to_string(),
            source,
        }
    }
}

impl From<GofError> for HarnessError {
    fn from(e: GofError) -> Self {
        match e {
            GofError::Configuration(_) | GofError::Parameter(_) => {
                HarnessError::Config(e.to_string())
            }
            GofError::Input(_)
            | GofError::SampleSize { .. }
            | GofError::DegeneratePool
            | GofError::DegenerateSpectrum
            | GofError::SpectrumOutOfRange(_) => HarnessError::Input(e.to_string()),
            GofError::Internal(_) => HarnessError::Internal(e.to_string()),
        }
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;
