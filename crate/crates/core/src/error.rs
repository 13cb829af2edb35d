use thiserror::Error;

/// Errors raised by the simulator and the analysis routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("bias field {b0} T is at or beyond the ground-state level anticrossing at {limit} T")]
    BeyondAnticrossing { b0: f64, limit: f64 },

    #[error("rotation axis must be a unit vector, got norm {0}")]
    NonUnitAxis(f64),

    #[error("duration must be non-negative, got {0} s")]
    NegativeDuration(f64),

    #[error("{0} must not be empty")]
    Empty(&'static str),

    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("operation requires uniformly sampled data")]
    NonUniformSampling,

    #[error("pulse count {0} is not a multiple of 8")]
    PulseCountNotMultipleOf8(usize),

    #[error("invalid pulse sequence: {0}")]
    InvalidSequence(String),

    #[error("inconsistent timing: {0}")]
    InconsistentTiming(String),

    #[error("dipole field is singular at zero displacement")]
    ZeroDisplacement,

    #[error("sample spin at ({0:.3}, {1:.3}, {2:.3}) um is not in the sample region")]
    SpinOutsideSample(f64, f64, f64),

    #[error("csv input: {0}")]
    Csv(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}

/// Rejects non-finite or non-positive values.
pub(crate) fn require_positive(name: &'static str, value: f64) -> Result<f64> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(invalid(name, format!("must be positive and finite, got {value}")))
    }
}

pub(crate) fn require_non_negative(name: &'static str, value: f64) -> Result<f64> {
    if value.is_finite() && value >= 0.0 {
        Ok(value)
    } else {
        Err(invalid(name, format!("must be non-negative and finite, got {value}")))
    }
}
