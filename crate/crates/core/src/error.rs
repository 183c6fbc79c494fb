use num_complex::Complex64;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("parameter `{name}` must be strictly positive, got {value}")]
    NonPositiveParameter { name: &'static str, value: f64 },

    #[error("piezoelectric coupling vanishes (gamma = 0); mixing coefficients are undefined")]
    DegenerateCoupling,

    #[error("invalid search budget: {0}")]
    InvalidBudget(String),

    #[error("truncation order must be at least 1, got {0}")]
    InvalidTruncation(usize),

    #[error("modal system for j = {j} is singular")]
    SingularModeSystem { j: usize },

    #[error("state violates the clamped end condition v(0) = p(0) = 0 (|v(0)| = {v0:e}, |p(0)| = {p0:e})")]
    NotClamped { v0: f64, p0: f64 },

    #[error("quadrature failed: {0}")]
    QuadratureFailure(String),

    #[error("time step {dt:e} exceeds the CFL bound {max:e}")]
    CflViolation { dt: f64, max: f64 },

    #[error("non-finite state produced at step {step}")]
    NonFiniteState { step: usize },

    #[error("energy sample {index} is not positive ({value:e})")]
    NonPositiveEnergy { index: usize, value: f64 },

    #[error("transfer function evaluated too close to a pole at s = {s}")]
    PoleProximity { s: Complex64 },

    #[error("discrete boundary-value system is numerically singular")]
    SingularSystem,

    #[error("coefficient array has J = {available} modes but mode {needed} is required")]
    TruncationTooSmall { needed: usize, available: usize },

    #[error("state has zero norm")]
    ZeroState,

    #[error("p = {p} and q = {q} are both odd; the spectrum has no uniform gap")]
    ParityViolation { p: u64, q: u64 },

    #[error("zeta2/zeta1 = {ratio} is not {p}/{q}")]
    NotRational { ratio: f64, p: u64, q: u64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),
}

impl Error {
    /// Failures caused by bad inputs, as opposed to numerical breakdown.
    pub fn is_validation(&self) -> bool {
        !matches!(
            self,
            Error::SingularModeSystem { .. }
                | Error::QuadratureFailure(_)
                | Error::NonFiniteState { .. }
                | Error::PoleProximity { .. }
                | Error::SingularSystem
                | Error::NonPositiveEnergy { .. }
        )
    }
}
