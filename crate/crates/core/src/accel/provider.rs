use super::SubproblemKind;
use crate::linalg::{self, NewtonOptions, Smooth};
use crate::model::{solve_regularized, solve_unregularized, SubproblemSolution, TaylorModel};
use crate::oracle::Problem;
use crate::stepsize::{ProximalOracle, ProximalStep};
use crate::{Error, Matrix, Point, Result};

/// Taylor-model steps: `x` from the model subproblem at `ṽ`,
/// `w = ∇Φ(x)`, `ε = 0`.
pub struct TaylorProvider<'a> {
    problem: &'a Problem,
    p: usize,
    ell: f64,
    kind: SubproblemKind,
    sigma_hat: f64,
    tol: f64,
}

impl<'a> TaylorProvider<'a> {
    pub fn new(problem: &'a Problem, p: usize, ell: f64, kind: SubproblemKind, sigma_hat: f64, tol: f64) -> Self {
        Self { problem, p, ell, kind, sigma_hat, tol }
    }
}

impl ProximalOracle for TaylorProvider<'_> {
    fn step(&self, lambda: f64, tilde_v: &Point) -> Result<ProximalStep> {
        let m = TaylorModel::new(self.problem, tilde_v, self.p, self.ell)?;
        let solution = match self.kind {
            SubproblemKind::Inexact => solve_regularized(&m, lambda, self.sigma_hat, self.tol)?,
            SubproblemKind::Exact => solve_unregularized(&m, self.tol)?,
        };
        let x = solution.u.clone();
        let w = self.problem.gradient(&x);
        Ok(ProximalStep { x, w, eps: 0.0, solution })
    }
}

/// Exact proximal point `argmin Φ(u) + ‖u - ṽ‖²/(2λ)` by Newton's method,
/// with `w = ∇Φ(x)` and `ε = 0`.
///
/// The solve stops once `‖λ∇Φ(x) + x - ṽ‖ ≤ 1e-9·‖x - ṽ‖`, or once the
/// residual drops below `tol²`. Near the minimizer with λ large the residual
/// stalls at its rounding level; a stalled point is still accepted when the
/// residual is at most `1e-3·‖x - ṽ‖`, and otherwise reported as
/// [`Error::PrecisionFloor`] when it lies under [`rounding_floor`].
pub struct ExactProx<'a> {
    problem: &'a Problem,
    tol: f64,
}

impl<'a> ExactProx<'a> {
    pub fn new(problem: &'a Problem, tol: f64) -> Self {
        Self { problem, tol }
    }
}

/// `λΦ(u) + ½‖u - ṽ‖²`.
struct Prox<'a> {
    problem: &'a Problem,
    lambda: f64,
    center: &'a Point,
}

impl Smooth for Prox<'_> {
    fn value(&self, u: &Point) -> f64 {
        self.lambda * self.problem.value(u) + 0.5 * (u - self.center).norm_squared()
    }
    fn gradient(&self, u: &Point) -> Point {
        self.problem.gradient(u) * self.lambda + (u - self.center)
    }
    fn hessian(&self, u: &Point) -> Matrix {
        let n = u.len();
        self.problem.objective().hessian(u) * self.lambda + Matrix::identity(n, n)
    }
}

/// Rounding level of `‖λ∇Φ(x) + x - ṽ‖` when evaluated in double
/// precision: `64ε(λ‖∇²Φ(x)‖(1 + ‖x‖) + ‖x‖ + ‖ṽ‖)`.
pub fn rounding_floor(problem: &Problem, lambda: f64, x: &Point, tilde_v: &Point) -> f64 {
    let h = problem.objective().hessian(x).norm();
    64.0 * f64::EPSILON * (lambda * h * (1.0 + x.norm()) + x.norm() + tilde_v.norm())
}

impl ProximalOracle for ExactProx<'_> {
    fn step(&self, lambda: f64, tilde_v: &Point) -> Result<ProximalStep> {
        let f = Prox { problem: self.problem, lambda, center: tilde_v };
        let out =
            linalg::minimize(&f, tilde_v.clone(), NewtonOptions { tol: self.tol * self.tol, max_iter: 200 }, |u, g| {
                g.norm() <= 1e-9 * (u - tilde_v).norm()
            });
        let x = out.point;
        let r = (&x - tilde_v).norm();
        if !out.converged && out.gradient.norm() > 1e-3 * r {
            let residual = out.gradient.norm();
            let floor = rounding_floor(self.problem, lambda, &x, tilde_v);
            return Err(if residual <= floor {
                Error::PrecisionFloor { residual, floor }
            } else {
                Error::InnerSolver { iterations: out.iterations, residual }
            });
        }
        let w = self.problem.gradient(&x);
        let solution = SubproblemSolution {
            u: x.clone(),
            r,
            model_gradient_at_u: w.clone(),
            inexactness_ratio: if r > 0.0 { out.gradient.norm() / r } else { 0.0 },
            residual: out.gradient.norm(),
            iterations: out.iterations,
        };
        Ok(ProximalStep { x, w, eps: 0.0, solution })
    }
}
