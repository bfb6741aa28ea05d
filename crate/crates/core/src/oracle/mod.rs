//! Objective interface and the built-in convex test problems.
//!
//! Every problem exposes exact derivatives up to order three. Third
//! derivatives are only available as the bilinear action
//! `∇³Φ(x)[u, w]`, never as a dense tensor. Each built-in problem documents a
//! Lipschitz constant `ℓ` for `∇^{(p)}Φ`, `p ∈ {1, 2, 3}`, on its test domain.

mod check;
mod problems;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::{Error, Matrix, Point, Result};

pub use check::{check_derivatives, DerivativeReport};
pub use problems::{LogSumExp, Logistic, PowerRegularized, Quadratic};

/// A smooth convex function on `R^d` with analytic derivatives.
pub trait Objective: Send + Sync {
    fn dim(&self) -> usize;

    /// Highest derivative order available through [`evaluate`].
    fn max_order(&self) -> usize {
        3
    }

    fn value(&self, x: &Point) -> f64;
    fn gradient(&self, x: &Point) -> Point;
    fn hessian(&self, x: &Point) -> Matrix;

    /// `∇³Φ(x)[u, w]` as a vector.
    fn third_action(&self, x: &Point, u: &Point, w: &Point) -> Point;

    /// `Φ(x) - min_value`. Problems with a cancellation-free closed form
    /// override this.
    fn excess(&self, x: &Point, min_value: f64) -> f64 {
        self.value(x) - min_value
    }
}

/// Derivatives of Φ at a point, up to the requested order.
pub struct OracleEvaluation<'a> {
    pub value: f64,
    pub gradient: Option<Point>,
    pub hessian: Option<Matrix>,
    pub third: Option<ThirdAction<'a>>,
}

/// Bound third-derivative action at a fixed point.
pub struct ThirdAction<'a> {
    objective: &'a dyn Objective,
    at: Point,
}

impl ThirdAction<'_> {
    pub fn apply(&self, u: &Point, w: &Point) -> Point {
        self.objective.third_action(&self.at, u, w)
    }
}

/// A test problem: objective plus its known solution and smoothness data.
#[derive(Clone)]
pub struct Problem {
    name: String,
    objective: Arc<dyn Objective>,
    minimizer: Option<Point>,
    min_value: Option<f64>,
    lipschitz: [f64; 3],
    start: Point,
}

impl std::fmt::Debug for Problem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Problem")
            .field("name", &self.name)
            .field("dim", &self.dim())
            .field("lipschitz", &self.lipschitz)
            .finish()
    }
}

impl Problem {
    /// `lipschitz[p - 1]` is the constant for `∇^{(p)}Φ`.
    pub fn new(name: impl Into<String>, objective: Arc<dyn Objective>, lipschitz: [f64; 3]) -> Self {
        let start = Point::zeros(objective.dim());
        Self { name: name.into(), objective, minimizer: None, min_value: None, lipschitz, start }
    }

    pub fn with_minimizer(mut self, x: Point, value: f64) -> Self {
        self.minimizer = Some(x);
        self.min_value = Some(value);
        self
    }

    pub fn with_start(mut self, x0: Point) -> Self {
        self.start = x0;
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.objective.dim()
    }

    pub fn objective(&self) -> &dyn Objective {
        self.objective.as_ref()
    }

    pub fn known_minimizer(&self) -> Option<&Point> {
        self.minimizer.as_ref()
    }

    pub fn known_min_value(&self) -> Option<f64> {
        self.min_value
    }

    /// Suggested starting point.
    pub fn start(&self) -> &Point {
        &self.start
    }

    /// Lipschitz constant of the p-th derivative on the test domain.
    pub fn lipschitz(&self, p: usize) -> Result<f64> {
        match p {
            1..=3 => Ok(self.lipschitz[p - 1]),
            _ => Err(Error::UnsupportedOrder { requested: p, max: 3 }),
        }
    }

    pub fn value(&self, x: &Point) -> f64 {
        self.objective.value(x)
    }

    pub fn gradient(&self, x: &Point) -> Point {
        self.objective.gradient(x)
    }

    /// `Φ(x) - Φ(x*)`, when the minimum is known.
    pub fn gap(&self, x: &Point) -> Option<f64> {
        self.min_value.map(|m| self.objective.excess(x, m))
    }
}

/// Evaluates Φ and its derivatives at `x` up to `order` (0..=3).
pub fn evaluate<'a>(problem: &'a Problem, x: &Point, order: usize) -> Result<OracleEvaluation<'a>> {
    let obj = problem.objective();
    if x.len() != obj.dim() {
        return Err(Error::DimensionMismatch { expected: obj.dim(), found: x.len() });
    }
    if order > obj.max_order() {
        return Err(Error::UnsupportedOrder { requested: order, max: obj.max_order() });
    }
    Ok(OracleEvaluation {
        value: obj.value(x),
        gradient: (order >= 1).then(|| obj.gradient(x)),
        hessian: (order >= 2).then(|| obj.hessian(x)),
        third: (order >= 3).then(|| ThirdAction { objective: obj, at: x.clone() }),
    })
}

/// Problem selection by name plus parameters, as read from experiment
/// configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum ProblemSpec {
    Quadratic(QuadraticParams),
    LogSumExp(LogSumExpParams),
    Logistic(LogisticParams),
    Power(PowerParams),
}

impl ProblemSpec {
    pub fn name(&self) -> &'static str {
        match self {
            ProblemSpec::Quadratic(_) => "quadratic",
            ProblemSpec::LogSumExp(_) => "log_sum_exp",
            ProblemSpec::Logistic(_) => "logistic",
            ProblemSpec::Power(_) => "power",
        }
    }

    /// Builds the problem; all random data derives from `seed`.
    pub fn build(&self, seed: u64) -> Result<Problem> {
        match self {
            ProblemSpec::Quadratic(p) => problems::build_quadratic(p, seed),
            ProblemSpec::LogSumExp(p) => problems::build_log_sum_exp(p, seed),
            ProblemSpec::Logistic(p) => problems::build_logistic(p, seed),
            ProblemSpec::Power(p) => problems::build_power(p, seed),
        }
    }
}

/// `½(x-c)ᵀQ(x-c)` with eigenvalues spaced geometrically in `[1/condition, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuadraticParams {
    pub dim: usize,
    pub condition: f64,
    /// Explicit spectrum; overrides `condition` when set.
    pub eigenvalues: Option<Vec<f64>>,
    /// Apply a random orthogonal change of basis.
    pub rotate: bool,
    /// Value reported for `ℓ` when p ≥ 2 (the true constant is 0).
    pub nominal_ell: f64,
    pub start_radius: f64,
}

impl Default for QuadraticParams {
    fn default() -> Self {
        Self { dim: 10, condition: 1e3, eigenvalues: None, rotate: true, nominal_ell: 1.0, start_radius: 1.0 }
    }
}

/// Symmetric log-sum-exp over the affine forms `±a_iᵀ(x-c) - b_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LogSumExpParams {
    pub dim: usize,
    /// Number of `±a_i` pairs; at least `dim` keeps the problem strictly convex.
    pub pairs: usize,
    pub scale: f64,
    pub start_radius: f64,
}

impl Default for LogSumExpParams {
    fn default() -> Self {
        Self { dim: 20, pairs: 40, scale: 1.0, start_radius: 1.0 }
    }
}

/// Ridge-regularized logistic regression on a synthetic planted design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LogisticParams {
    pub dim: usize,
    pub samples: usize,
    pub ridge: f64,
    pub start_radius: f64,
}

impl Default for LogisticParams {
    fn default() -> Self {
        Self { dim: 10, samples: 100, ridge: 1e-2, start_radius: 1.0 }
    }
}

/// `½‖x-c‖² + (κ/4)‖x-c‖⁴` on the ball of radius `radius` around `c`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PowerParams {
    pub dim: usize,
    pub kappa: f64,
    pub radius: f64,
    pub start_radius: f64,
}

impl Default for PowerParams {
    fn default() -> Self {
        Self { dim: 5, kappa: 1.0, radius: 2.0, start_radius: 0.5 }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn evaluate_identity_quadratic() {
        let p = Quadratic::problem(Matrix::identity(1, 1), Point::zeros(1));
        let e = evaluate(&p, &Point::from_vec(vec![2.0]), 2).unwrap();
        assert_eq!(e.value, 2.0);
        assert_eq!(e.gradient.unwrap()[0], 2.0);
        assert_eq!(e.hessian.unwrap()[(0, 0)], 1.0);
    }

    #[test]
    fn evaluate_symmetric_log_sum_exp_at_origin() {
        let p = LogSumExp::problem(Matrix::identity(1, 1), Point::zeros(1), Point::zeros(1));
        let e = evaluate(&p, &Point::zeros(1), 1).unwrap();
        assert!((e.value - 2f64.ln()).abs() < 1e-15);
        assert_eq!(e.gradient.unwrap()[0], 0.0);
    }

    #[test]
    fn evaluate_diagonal_quadratic_gradient() {
        let q = Matrix::from_diagonal(&Point::from_vec(vec![1.0, 4.0]));
        let p = Quadratic::problem(q, Point::zeros(2));
        let e = evaluate(&p, &Point::from_vec(vec![1.0, 1.0]), 1).unwrap();
        assert_eq!(e.gradient.unwrap(), Point::from_vec(vec![1.0, 4.0]));
        assert!(e.hessian.is_none());
    }

    #[test]
    fn evaluate_rejects_bad_dimension_and_order() {
        let p = Quadratic::problem(Matrix::identity(2, 2), Point::zeros(2));
        assert_eq!(evaluate(&p, &Point::zeros(3), 1).err(), Some(Error::DimensionMismatch { expected: 2, found: 3 }));
        assert_eq!(evaluate(&p, &Point::zeros(2), 4).err(), Some(Error::UnsupportedOrder { requested: 4, max: 3 }));
    }
}
