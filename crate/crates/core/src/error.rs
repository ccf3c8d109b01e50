use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("inconsistent record (serial {serial}): {message}")]
    Consistency { serial: i64, message: String },

    #[error("invalid observation {index}: {message}")]
    InvalidObservation { index: usize, message: String },

    #[error("{name} must be positive and finite, got {value}")]
    Domain { name: &'static str, value: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("no failures from cause {cause}; both causes need at least one observed failure")]
    EmptyCause { cause: u8 },

    #[error("shape solver did not converge: {message}")]
    Convergence { message: String, trace: Vec<f64> },

    #[error("scale estimate is not representable at alpha = {alpha} (ln w2 = {log_w2}); rescale the time unit")]
    ScaleUnderflow { alpha: f64, log_w2: f64 },

    #[error("bootstrap unstable: {failed} of {total} replicates failed")]
    UnstableBootstrap { failed: usize, total: usize },

    #[error("sample too small: need at least {needed} values, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("sampler failure: {0}")]
    Sampler(String),
}

pub(crate) fn check_positive(name: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain { name, value })
    }
}
