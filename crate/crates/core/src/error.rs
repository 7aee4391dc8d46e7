use thiserror::Error;

/// Errors raised by the library.
///
/// The variants map onto the CLI exit codes: input problems exit with 2,
/// numerical and sampler failures with 3, calibration failures with 4.
#[derive(Debug, Error)]
pub enum Error {
    #[error("input error: {0}")]
    Input(String),

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("sampler error: {0}")]
    Sampler(String),

    #[error("invariant violation: {0}")]
    Invariant(String),

    #[error("calibration error: {0}")]
    Calibration(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    /// Short machine-readable tag for structured error output.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Input(_) => "input",
            Error::Numerical(_) => "numerical",
            Error::Sampler(_) => "sampler",
            Error::Invariant(_) => "invariant",
            Error::Calibration(_) => "calibration",
            Error::Io(_) => "io",
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
        }
    }

    /// Process exit code for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Input(_) | Error::Io(_) | Error::Csv(_) | Error::Json(_) => 2,
            Error::Numerical(_) | Error::Sampler(_) | Error::Invariant(_) => 3,
            Error::Calibration(_) => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
