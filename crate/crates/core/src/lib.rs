//! Accelerated high-order convex minimization driven by a closed-loop
//! feedback law.
//!
//! The crate is organised around five pieces:
//!
//! * [`oracle`]: the objective interface and a suite of smooth convex test
//!   problems with analytic derivatives and documented Lipschitz constants.
//! * [`model`]: the regularized p-th order Taylor model and its two
//!   subproblem solvers.
//! * [`stepsize`]: the feedback law `λ^p ‖∇Φ‖^{p-1} = θ`, the coupling
//!   recurrences and the large-step bisection search.
//! * [`accel`]: the two conceptual frameworks (accumulating through `A_k` or
//!   `γ_k`), their tensor instantiations and the trace auditor.
//! * [`flow`]: the continuous-time closed-loop system, integrated with an
//!   adaptive Dormand-Prince pair, plus its Lyapunov diagnostics.

pub mod accel;
pub mod error;
pub mod flow;
pub mod linalg;
pub mod model;
pub mod oracle;
pub mod stepsize;

pub use error::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Dense real vector; iterates and ODE states live here.
pub type Point = nalgebra::DVector<f64>;

/// Dense square matrix (Hessians).
pub type Matrix = nalgebra::DMatrix<f64>;

/// `n!` for the small orders used here.
pub(crate) fn factorial(n: usize) -> f64 {
    (1..=n).map(|i| i as f64).product()
}
