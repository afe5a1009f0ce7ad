use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("{name} = {value} is outside {domain}")]
    Domain {
        name: &'static str,
        value: f64,
        domain: &'static str,
    },

    #[error("extinction reached at t = {time} (width {width:e})")]
    Extinction { time: f64, width: f64 },

    #[error("numerical instability at t = {time}: {reason}")]
    Instability { time: f64, reason: String },

    #[error("contact slope at the {side} junction drifted by {drift:e}")]
    ContactSlope { side: &'static str, drift: f64 },

    #[error("no sign change of {what} on [{lo}, {hi}]")]
    NoBracket { what: String, lo: f64, hi: f64 },

    #[error("quadrature stalled at error estimate {estimate:e} (requested {tol:e})")]
    Quadrature { tol: f64, estimate: f64 },

    #[error("closure residual {residual:e} exceeds {tol:e}")]
    Closure { residual: f64, tol: f64 },

    #[error("integration step underflow near x = {x}")]
    StepUnderflow { x: f64 },

    #[error("not enough data: {0}")]
    Insufficient(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn domain(name: &'static str, value: f64, domain: &'static str) -> Error {
    Error::Domain {
        name,
        value,
        domain,
    }
}
