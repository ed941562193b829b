use thiserror::Error;

use crate::dsl::ParseError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("integrand is not finite at r = {at}")]
    NonFinite { at: f64 },
    #[error("quadrature on [{a}, {b}] stopped at estimated error {estimate:e} after {intervals} subintervals")]
    ToleranceNotMet {
        a: f64,
        b: f64,
        estimate: f64,
        intervals: usize,
    },
    #[error("ODE solution exceeded the overflow guard at r = {at}")]
    Blowup { at: f64 },
    #[error("right-hand side is singular at r = {at} and no leading exponent was supplied")]
    SingularityUnhandled { at: f64 },
    #[error("target {target} is not bracketed by [{f_lo}, {f_hi}]")]
    NotBracketed { target: f64, f_lo: f64, f_hi: f64 },
    #[error("function is not monotone on the bracket near r = {at}")]
    NotMonotone { at: f64 },
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("{function}({argument}) is undefined at r = {at}")]
    Domain {
        function: &'static str,
        argument: f64,
        at: f64,
    },
    #[error("radius {r} is outside [0, {max}]")]
    OutOfDomain { r: f64, max: f64 },
    #[error("{quantity}: independent evaluations disagree ({first} vs {second})")]
    InternalMismatch {
        quantity: &'static str,
        first: f64,
        second: f64,
    },
    #[error("auxiliary function cannot start as r^(m-1): {reason}")]
    NonPositiveLambda { reason: String },
    #[error("inadmissible {field}: {reason}")]
    Inadmissible { field: &'static str, reason: String },
    #[error("{criterion}: quotient form and derivative form disagree at r = {at}")]
    FormDisagreement { criterion: &'static str, at: f64 },
    #[error("target model holds only {available} volume, {requested} requested")]
    InsufficientRoom { requested: f64, available: f64 },
    #[error("curvature ordering required by the comparison fails at r = {at} (K_N = {k_n}, K_w = {k_w})")]
    CurvatureOrderViolated { at: f64, k_n: f64, k_w: f64 },
    #[error("q_W did not stabilize along the radius ladder (last estimates {estimates:?})")]
    InconclusiveGrowth { estimates: Vec<f64> },
    #[error("time step too large: dt * max drift = {product} exceeds {limit}")]
    StepTooLarge { product: f64, limit: f64 },
    #[error("invalid volume profile: {0}")]
    InvalidProfile(String),
    #[error("invalid Monte Carlo configuration: {0}")]
    InvalidConfig(String),
}

impl Error {
    /// Errors that mean a theorem hypothesis fails for the supplied data rather than
    /// a computational failure.
    pub fn is_hypothesis_violation(&self) -> bool {
        matches!(
            self,
            Error::NonPositiveLambda { .. }
                | Error::CurvatureOrderViolated { .. }
                | Error::InsufficientRoom { .. }
        )
    }
}
