use thiserror::Error;

/// Errors raised by the simulators, solvers and file readers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid operator: {0}")]
    InvalidOperator(String),

    #[error("site {site} out of range for a chain of {len} sites")]
    SiteOutOfRange { site: usize, len: usize },

    #[error("site {0} appears more than once in an operator support")]
    DuplicateSite(usize),

    #[error("operator is not unitary (deviation {0:.3e})")]
    NotUnitary(f64),

    #[error("operator is not hermitian (deviation {0:.3e})")]
    NotHermitian(f64),

    #[error("operator is not a projector (deviation {0:.3e})")]
    NotProjector(f64),

    #[error("measurement probability {0} outside [0, 1]")]
    ProbabilityOutOfRange(f64),

    #[error("collapse onto a null vector (post-measurement norm {0:.3e})")]
    NullCollapse(f64),

    #[error("entanglement cut {cut} out of range for {len} sites")]
    CutOutOfRange { cut: usize, len: usize },

    #[error("local dimension {0} is not supported here")]
    UnsupportedLocalDim(usize),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("state has weight outside the requested charge sector ({0:.3e})")]
    SectorLeak(f64),

    #[error("invalid configuration for `{key}`: {msg}")]
    Config { key: String, msg: String },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("kernel has dimension {0}, expected 1")]
    DegenerateKernel(usize),

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(key: &str, msg: impl Into<String>) -> Self {
        Error::Config { key: key.to_string(), msg: msg.into() }
    }

    /// True for errors caused by bad user input rather than a numerical breakdown.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Config { .. }
                | Error::SiteOutOfRange { .. }
                | Error::DuplicateSite(_)
                | Error::CutOutOfRange { .. }
                | Error::UnsupportedLocalDim(_)
                | Error::DimensionMismatch(_)
                | Error::Parse(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
