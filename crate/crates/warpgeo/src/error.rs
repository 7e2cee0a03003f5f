use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeoError {
    #[error("extreme warp evaluated on the singular set (r = {r})")]
    ExtremeAtPole { r: f64 },
    #[error("invalid warp parameters: {0}")]
    InvalidWarp(String),
    #[error("no threshold found for m = {m}: {reason}")]
    NoThreshold { m: u32, reason: String },
    #[error("quadrature did not converge: error estimate {error:.3e} exceeds tolerance {tol:.3e}")]
    QuadratureNoConvergence { error: f64, tol: f64 },
    #[error("fiber separation {delta} is not below the admissible threshold {limit}")]
    DeltaTooLarge { delta: f64, limit: f64 },
    #[error("length decreased by {decrease:.3e} between schedule entries {index} and {next}", next = index + 1)]
    MonotonicityViolation { index: usize, decrease: f64 },
    #[error("fibers over the singular set are unrectifiable under the extreme warp")]
    ExtremeUnrectifiable,
    #[error("grid touches the singular set with an unclamped extreme warp")]
    SingularNode,
    #[error("target unreachable in the restricted grid")]
    Unreachable,
    #[error("point at rho = {rho} lies outside the tube complement rho >= {radius}")]
    OutsideTube { rho: f64, radius: f64 },
    #[error("exponent condition 1 + 1/(m-1) < p fails for p = {p}, m = {m}")]
    ExponentCondition { p: f64, m: u32 },
    #[error("invalid grid specification: {0}")]
    InvalidGrid(String),
    #[error("invalid curve: {0}")]
    InvalidCurve(String),
}

pub type Result<T> = std::result::Result<T, GeoError>;
