use thiserror::Error;

/// Errors raised by scenario construction, the solvers and the file formats.
#[derive(Debug, Error)]
pub enum CrsError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("time split theta = {0} outside (0, 1]")]
    InvalidTheta(f64),

    #[error("QoS targets unattainable: {0}")]
    Infeasible(String),

    #[error("inconsistent scheme definition: {0}")]
    InconsistentScheme(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, CrsError>;

pub(crate) fn invalid(msg: impl Into<String>) -> CrsError {
    CrsError::InvalidInput(msg.into())
}

pub(crate) fn check_theta(theta: f64) -> Result<()> {
    if theta.is_finite() && theta > 0.0 && theta <= 1.0 {
        Ok(())
    } else {
        Err(CrsError::InvalidTheta(theta))
    }
}
