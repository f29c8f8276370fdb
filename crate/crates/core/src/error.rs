use thiserror::Error;

/// Errors raised by kernels, filters, statistics and calibration routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum GofError {
    #[error("invalid input: {0}")]
    Input(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("sample size too small: {what} has {got} points, needs at least {needed}")]
    SampleSize {
        what: &'static str,
        got: usize,
        needed: usize,
    },

    #[error("degenerate pool: all pairwise distances are zero")]
    DegeneratePool,

    #[error("degenerate spectrum: no eigenvalue above the numerical floor")]
    DegenerateSpectrum,

    #[error("eigenvalue {0} lies outside the filter domain [0, 1]")]
    SpectrumOutOfRange(f64),

    #[error("configuration error: {0}")]
    Configuration(String),

    #[error("internal consistency error: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, GofError>;

pub(crate) fn ensure_min_size(what: &'static str, got: usize, needed: usize) -> Result<()> {
    if got < needed {
        Err(GofError::SampleSize { what, got, needed })
    } else {
        Ok(())
    }
}
