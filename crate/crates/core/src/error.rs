use num_complex::Complex64;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("quadrature did not reach tolerance {tolerance:e} within {intervals} intervals (error estimate {estimate:e})")]
    QuadratureFailure {
        tolerance: f64,
        intervals: usize,
        estimate: f64,
    },
    #[error("integrand is not finite at u = {at}")]
    NonFiniteIntegrand { at: f64 },
    #[error("density piece {piece} has unbounded support but no tail exponent")]
    MissingTailMetadata { piece: usize },
    #[error("moment is of the form +inf - inf")]
    IndeterminateMoment,
    #[error("invalid measure: {0}")]
    InvalidMeasure(String),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("function is not Nevanlinna: Im f({z}) = {} > 0", value.im)]
    NotNevanlinna { z: Complex64, value: Complex64 },
    #[error("extrapolation ladder did not converge (spread {spread:e})")]
    ExtrapolationUnstable { spread: f64 },
    #[error("Newton iteration diverged after {} iterates", trace.len())]
    NewtonDivergence { trace: Vec<Complex64> },
    #[error("{z} lies outside the estimated inversion domain")]
    OutsideInversionDomain { z: Complex64 },
    #[error("measure is not a probability measure (total mass {mass})")]
    NotProbability { mass: f64 },
    #[error("path passes within 1e-9 of the pole {pole}")]
    PoleOnPath { pole: f64 },
    #[error("{w} is outside the image (inversion did not converge)")]
    OutsideImage { w: Complex64 },
    #[error("primitive image does not contain a translate of the upper half-plane")]
    NotContaining,
    #[error("no conformal pair attached to this flow field")]
    NoConformalPair,
    #[error("ODE step size fell below the minimum at time {time} (state {state})")]
    StepUnderflow { time: f64, state: Complex64 },
    #[error("ODE trajectory reached the real axis at time {time} (state {state})")]
    BoundaryReached { time: f64, state: Complex64 },
    #[error("evaluator returned a non-finite value at {z}")]
    EvaluatorFailure { z: Complex64 },
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
