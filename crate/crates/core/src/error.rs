use thiserror::Error;

pub type Result<T> = std::result::Result<T, ToaError>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ToaError {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate channel: incident wavenumber k = 0")]
    DegenerateChannel,

    #[error("no classical arrival from the left (k0 = {k0})")]
    NoClassicalArrival { k0: f64 },

    #[error("quadrature resolution inadequate on {axis} axis: {detail}")]
    Resolution { axis: &'static str, detail: String },

    #[error(
        "premature readout at t = {t}: {left_mass:.3e} of the incident packet is still on x < 0"
    )]
    PrematureReadout { t: f64, left_mass: f64 },

    #[error("peaks are not resolvable: separation {separation} vs widths {width1}, {width2}")]
    UnresolvablePeaks {
        separation: f64,
        width1: f64,
        width2: f64,
    },

    #[error("incident wavenumber {k_in} outside the propagating window ({lo}, {hi})")]
    EvanescentInput { k_in: f64, lo: f64, hi: f64 },

    #[error("envelope support [{lo}, {hi}] leaves the admissible window")]
    SupportViolation { lo: f64, hi: f64 },

    #[error("integrator step underflow at t = {t}, x = {x}")]
    StepUnderflow { t: f64, x: f64 },

    #[error("regularization did not converge: {0}")]
    Regularization(String),

    #[error("infrared singularity: {weight:.3e} of the state lies below k_min = {k_min}")]
    InfraredSingularity { weight: f64, k_min: f64 },

    #[error("time stepper unstable: {0}")]
    Stability(String),

    #[error("channel time mismatch: {a} vs {b}")]
    ChannelTimeMismatch { a: f64, b: f64 },

    #[error("poor fit (R^2 = {r2:.4}): {detail}")]
    PoorFit { r2: f64, detail: String },
}

pub(crate) fn require(cond: bool, name: &'static str, reason: impl Into<String>) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(ToaError::InvalidParameter {
            name,
            reason: reason.into(),
        })
    }
}
