//! Regularized p-th order Taylor model
//!
//! `Φ_v(u) = Φ(v) + Σ_{j≤p} ∇^{(j)}Φ(v)[u-v]^j / j! + ℓ‖u-v‖^{p+1}/(p+1)!`
//!
//! and the two subproblems built on it: the proximal one
//! `min Φ_v(u) + ‖u-v‖²/(2λ)`, solved to a σ̂-inexact point, and the plain
//! `min Φ_v(u)`, solved to a residual tolerance.

use crate::linalg::{self, NewtonOptions, Smooth};
use crate::oracle::{evaluate, Problem};
use crate::{factorial, Error, Matrix, Point, Result};

/// Default absolute tolerance on stationarity residuals.
pub const DEFAULT_TOL: f64 = 1e-10;

const MAX_INNER_ITER: usize = 200;

/// Taylor model of order `p ∈ {1, 2, 3}` centred at `v`.
#[derive(Debug, Clone)]
pub struct TaylorModel {
    problem: Problem,
    center: Point,
    value: f64,
    gradient: Point,
    hessian: Option<Matrix>,
    ell: f64,
    order: usize,
}

/// Result of a subproblem solve.
#[derive(Debug, Clone, PartialEq)]
pub struct SubproblemSolution {
    pub u: Point,
    /// `‖u - v‖`.
    pub r: f64,
    pub model_gradient_at_u: Point,
    /// `‖λ∇Φ_v(u) + u - v‖ / ‖u - v‖` for the proximal subproblem; 0 for the
    /// plain one.
    pub inexactness_ratio: f64,
    /// Norm of the stationarity residual of the solved subproblem.
    pub residual: f64,
    pub iterations: usize,
}

impl TaylorModel {
    /// Caches `Φ(v)`, `∇Φ(v)` and, for `p ≥ 2`, `∇²Φ(v)`.
    pub fn new(problem: &Problem, v: &Point, order: usize, ell: f64) -> Result<Self> {
        if !(1..=3).contains(&order) {
            return Err(Error::UnsupportedOrder { requested: order, max: 3 });
        }
        if !(ell > 0.0) {
            return Err(Error::InvalidConfig(format!("model regularization must be positive, got {ell}")));
        }
        let e = evaluate(problem, v, order.min(2))?;
        Ok(Self {
            problem: problem.clone(),
            center: v.clone(),
            value: e.value,
            gradient: e.gradient.expect("order >= 1"),
            hessian: e.hessian,
            ell,
            order,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn ell(&self) -> f64 {
        self.ell
    }

    pub fn center(&self) -> &Point {
        &self.center
    }

    /// `∇Φ(v)`.
    pub fn center_gradient(&self) -> &Point {
        &self.gradient
    }

    fn third(&self, u: &Point, w: &Point) -> Point {
        self.problem.objective().third_action(&self.center, u, w)
    }

    fn reg_coef(&self) -> f64 {
        self.ell / factorial(self.order + 1)
    }

    /// `Φ_v(v + d) - Φ(v)`.
    fn increment(&self, d: &Point) -> f64 {
        let r = d.norm();
        let mut val = self.gradient.dot(d);
        if let Some(h) = &self.hessian {
            val += 0.5 * d.dot(&(h * d));
        }
        if self.order == 3 {
            val += self.third(d, d).dot(d) / 6.0;
        }
        val + self.reg_coef() * r.powi(self.order as i32 + 1)
    }

    fn gradient_at(&self, d: &Point) -> Point {
        let r = d.norm();
        let mut g = self.gradient.clone();
        if let Some(h) = &self.hessian {
            g += h * d;
        }
        if self.order == 3 {
            g += self.third(d, d) * 0.5;
        }
        // ∇ (c‖d‖^{p+1}) = c (p+1) ‖d‖^{p-1} d
        g + d * (self.reg_coef() * (self.order + 1) as f64 * r.powi(self.order as i32 - 1))
    }

    fn hessian_at(&self, d: &Point) -> Matrix {
        let n = d.len();
        let r = d.norm();
        let mut h = self.hessian.clone().unwrap_or_else(|| Matrix::zeros(n, n));
        if self.order == 3 {
            for j in 0..n {
                let ej = Point::from_fn(n, |i, _| if i == j { 1.0 } else { 0.0 });
                h.set_column(j, &(h.column(j) + self.third(d, &ej)));
            }
        }
        let c = self.reg_coef() * (self.order + 1) as f64;
        let eye = Matrix::identity(n, n);
        match self.order {
            1 => h + eye * c,
            2 => {
                if r > 0.0 {
                    h + (eye * r + d * d.transpose() / r) * c
                } else {
                    h
                }
            }
            _ => h + (eye * (r * r) + d * d.transpose() * 2.0) * c,
        }
    }

    /// `Φ_v(u)`.
    pub fn model_value(&self, u: &Point) -> f64 {
        self.value + self.increment(&(u - &self.center))
    }

    /// `∇Φ_v(u)`.
    pub fn model_gradient(&self, u: &Point) -> Point {
        self.gradient_at(&(u - &self.center))
    }

    /// `∇²Φ_v(u)`.
    pub fn model_hessian(&self, u: &Point) -> Matrix {
        self.hessian_at(&(u - &self.center))
    }

    fn stationary_solution(&self) -> SubproblemSolution {
        SubproblemSolution {
            u: self.center.clone(),
            r: 0.0,
            model_gradient_at_u: self.gradient.clone(),
            inexactness_ratio: 0.0,
            residual: 0.0,
            iterations: 0,
        }
    }
}

/// `λ(Φ_v(v+d) - Φ(v)) + ½‖d‖²` in the displacement `d`, or the plain
/// model increment when `lambda` is `None`.
struct Subproblem<'a> {
    m: &'a TaylorModel,
    lambda: Option<f64>,
}

impl Smooth for Subproblem<'_> {
    fn value(&self, d: &Point) -> f64 {
        match self.lambda {
            Some(l) => l * self.m.increment(d) + 0.5 * d.norm_squared(),
            None => self.m.increment(d),
        }
    }

    fn gradient(&self, d: &Point) -> Point {
        match self.lambda {
            Some(l) => self.m.gradient_at(d) * l + d,
            None => self.m.gradient_at(d),
        }
    }

    fn hessian(&self, d: &Point) -> Matrix {
        match self.lambda {
            Some(l) => {
                let n = d.len();
                self.m.hessian_at(d) * l + Matrix::identity(n, n)
            }
            None => self.m.hessian_at(d),
        }
    }
}

/// Minimizes `Φ_v` until `‖∇Φ_v(u)‖ ≤ tol·max(1, ‖∇Φ(v)‖)`.
pub fn solve_unregularized(m: &TaylorModel, tol: f64) -> Result<SubproblemSolution> {
    assert!(tol > 0.0);
    let gnorm = m.gradient.norm();
    if gnorm == 0.0 {
        return Ok(m.stationary_solution());
    }
    let target = tol * gnorm.max(1.0);
    let (d, iterations) = if m.order == 1 {
        (-&m.gradient / m.ell, 0)
    } else {
        let f = Subproblem { m, lambda: None };
        let out = linalg::minimize(
            &f,
            Point::zeros(m.center.len()),
            NewtonOptions { tol: target, max_iter: MAX_INNER_ITER },
            |_, _| false,
        );
        if !out.converged {
            return Err(Error::InnerSolver { iterations: out.iterations, residual: out.gradient.norm() });
        }
        (out.point, out.iterations)
    };
    let mg = m.gradient_at(&d);
    Ok(SubproblemSolution {
        r: d.norm(),
        u: &m.center + &d,
        residual: mg.norm(),
        model_gradient_at_u: mg,
        inexactness_ratio: 0.0,
        iterations,
    })
}

/// σ̂-inexact solution of `min Φ_v(u) + ‖u-v‖²/(2λ)`.
///
/// The inner solve runs until the residual `‖λ∇Φ_v(u) + u - v‖` drops below
/// `tol·max(1, λ‖∇Φ(v)‖)`; if the iteration cap is hit first, the iterate is
/// still returned when it passes the σ̂ test. When `‖u - v‖ ≤ 10·tol` the
/// ratio is reported as 0 if the residual is at most `tol`, and as infinity
/// otherwise.
pub fn solve_regularized(m: &TaylorModel, lambda: f64, sigma_hat: f64, tol: f64) -> Result<SubproblemSolution> {
    assert!(lambda > 0.0 && tol > 0.0);
    assert!(sigma_hat > 0.0 && sigma_hat < 1.0);
    let gnorm = m.gradient.norm();
    if gnorm == 0.0 {
        return Ok(m.stationary_solution());
    }
    let (d, iterations, converged) = if m.order == 1 {
        (-&m.gradient / (m.ell + 1.0 / lambda), 0, true)
    } else {
        let f = Subproblem { m, lambda: Some(lambda) };
        let out = linalg::minimize(
            &f,
            Point::zeros(m.center.len()),
            NewtonOptions { tol: tol * (lambda * gnorm).max(1.0), max_iter: MAX_INNER_ITER },
            |_, _| false,
        );
        (out.point, out.iterations, out.converged)
    };
    let mg = m.gradient_at(&d);
    let residual = (&mg * lambda + &d).norm();
    let r = d.norm();
    let ratio = if r <= 10.0 * tol {
        if residual <= tol {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        residual / r
    };
    if !converged && ratio > sigma_hat {
        return Err(Error::InnerSolver { iterations, residual });
    }
    Ok(SubproblemSolution {
        u: &m.center + &d,
        r,
        model_gradient_at_u: mg,
        inexactness_ratio: ratio,
        residual,
        iterations,
    })
}
