use thiserror::Error;

pub type Result<T> = std::result::Result<T, TtpError>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TtpError {
    #[error("position {r:?} at t={t} is outside the domain {bounds}")]
    OutOfDomain { r: [f64; 3], t: f64, bounds: String },

    #[error("normalized kinetic pressure is negative ({p1hat}) at {r:?}")]
    NegativePressure { p1hat: f64, r: [f64; 3] },

    #[error("pressure gradient magnitude {magnitude:e} is at or below eps_grad={eps_grad:e}")]
    DegenerateGradient { magnitude: f64, eps_grad: f64 },

    #[error("unknown field provider `{0}`")]
    NotFound(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("grid spacing is not uniform along {axis}: {message}")]
    NonUniformSpacing { axis: char, message: String },

    #[error("invalid `{key}`: {message}")]
    Validation { key: String, message: String },

    #[error("initial direction violates tangency: |n0 . b| = {n_dot_b:e} exceeds {tolerance:e}")]
    InitialTangencyViolation { n_dot_b: f64, tolerance: f64 },

    #[error("ensemble is empty at t={t}")]
    EmptyEnsemble { t: f64 },

    #[error("provider `{0}` has no closed-form trajectory oracle")]
    NoOracle(String),

    #[error("order fit needs at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },

    #[error("check failed: {0}")]
    CheckFailed(String),

    #[error("i/o error on {path}: {message}")]
    Io { path: String, message: String },
}

impl TtpError {
    pub fn validation(key: impl Into<String>, message: impl Into<String>) -> Self {
        TtpError::Validation {
            key: key.into(),
            message: message.into(),
        }
    }

    pub fn io(path: impl AsRef<std::path::Path>, err: std::io::Error) -> Self {
        TtpError::Io {
            path: path.as_ref().display().to_string(),
            message: err.to_string(),
        }
    }

    /// Config and validation failures map to exit code 2, everything else to 3.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            TtpError::Parse { .. } | TtpError::Validation { .. } | TtpError::NotFound(_)
        )
    }
}
