use thiserror::Error;

/// Errors produced anywhere in the segmentation toolkit.
///
/// Variants are coarse on purpose: the command-line front end maps each one
/// onto a distinct exit code.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("grain placement failed: {0}")]
    Placement(String),

    #[error("no convergence after {applications} operator applications (best relative residual {residual:.3e})")]
    Convergence { applications: usize, residual: f64 },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn arg_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Argument(msg.into()))
}
