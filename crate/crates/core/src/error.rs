use thiserror::Error;

/// Errors raised by the solvers, the oracles and the integrator.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("derivative order {requested} not supported (max {max})")]
    UnsupportedOrder { requested: usize, max: usize },

    /// The gradient vanished where the feedback law needs a positive norm.
    #[error("stationary point reached (gradient norm {grad_norm:e})")]
    Stationary { grad_norm: f64 },

    #[error("inner solver hit its iteration cap ({iterations}) with residual {residual:e}")]
    InnerSolver { iterations: usize, residual: f64 },

    /// The proximal residual cannot be pushed below its rounding floor.
    #[error("proximal residual {residual:e} is at its rounding floor {floor:e}")]
    PrecisionFloor { residual: f64, floor: f64 },

    #[error("no bracket for the large-step window after {doublings} doublings")]
    BracketNotFound { doublings: usize },

    #[error("bisection exhausted {probes} probes without entering the window")]
    BisectionExhausted { probes: usize },

    #[error("minimizer of the problem is unknown")]
    UnknownMinimizer,

    #[error("step size underflow at t = {t:e} (h = {h:e})")]
    StepSizeUnderflow { t: f64, h: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("step budget of {steps} exhausted at t = {t:e}")]
    StepBudgetExhausted { t: f64, steps: usize },

    #[error("unknown problem `{0}`")]
    UnknownProblem(String),
}

pub type Result<T> = std::result::Result<T, Error>;
