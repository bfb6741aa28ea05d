//! Small dense helpers shared by the subproblem solvers: a globalized Newton
//! minimizer for smooth convex functions.

use nalgebra::Cholesky;

use crate::{Matrix, Point};

/// A twice-differentiable function of a dense vector.
pub trait Smooth {
    fn value(&self, u: &Point) -> f64;
    fn gradient(&self, u: &Point) -> Point;
    fn hessian(&self, u: &Point) -> Matrix;
}

#[derive(Debug, Clone, Copy)]
pub struct NewtonOptions {
    /// Absolute tolerance on the gradient norm.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 200 }
    }
}

#[derive(Debug, Clone)]
pub struct NewtonOutcome {
    pub point: Point,
    pub gradient: Point,
    pub iterations: usize,
    pub converged: bool,
}

const STALL_LIMIT: usize = 20;

/// Solves `(H + shift I) x = rhs`, raising the shift until the Cholesky
/// factorization succeeds.
pub fn shifted_solve(h: &Matrix, rhs: &Point) -> Option<Point> {
    let n = h.nrows();
    let scale = h.diagonal().amax().max(1e-300);
    let mut shift = 0.0;
    for _ in 0..40 {
        let mut m = h.clone();
        if shift > 0.0 {
            for i in 0..n {
                m[(i, i)] += shift;
            }
        }
        if let Some(ch) = Cholesky::new(m) {
            let x = ch.solve(rhs);
            if x.iter().all(|v| v.is_finite()) {
                return Some(x);
            }
        }
        shift = if shift == 0.0 { 1e-12 * scale } else { shift * 10.0 };
    }
    None
}

/// Damped Newton with Armijo backtracking and a steepest-descent fallback.
///
/// `stop` is consulted after every iterate and may end the solve early (used
/// for relative-error stopping rules that the plain gradient tolerance cannot
/// express). When the gradient norm has not improved for `STALL_LIMIT`
/// iterations the best iterate so far is returned unconverged; this happens
/// once the residual reaches its rounding floor.
pub fn minimize<F, S>(f: &F, start: Point, opts: NewtonOptions, stop: S) -> NewtonOutcome
where
    F: Smooth + ?Sized,
    S: Fn(&Point, &Point) -> bool,
{
    let mut u = start;
    let mut fu = f.value(&u);
    let mut g = f.gradient(&u);
    let mut best = (u.clone(), g.clone(), g.norm());
    let mut stalled = 0;

    for it in 0..opts.max_iter {
        let gnorm = g.norm();
        if gnorm <= opts.tol || stop(&u, &g) {
            return NewtonOutcome { point: u, gradient: g, iterations: it, converged: true };
        }
        if gnorm < best.2 {
            best = (u.clone(), g.clone(), gnorm);
            stalled = 0;
        } else {
            stalled += 1;
            if stalled >= STALL_LIMIT {
                return NewtonOutcome { point: best.0, gradient: best.1, iterations: it, converged: false };
            }
        }

        let h = f.hessian(&u);
        let mut dir = shifted_solve(&h, &(-&g)).unwrap_or_else(|| -&g);
        if g.dot(&dir) >= 0.0 {
            dir = -&g;
        }

        // Armijo compares values; once the predicted decrease is below their
        // rounding resolution that comparison is noise.
        let resolvable = g.dot(&dir).abs() > 1e3 * f64::EPSILON * fu.abs().max(1.0);
        let searched = if resolvable { line_search(f, &u, fu, &g, &dir) } else { None };
        match searched {
            Some((un, fn_)) => {
                u = un;
                fu = fn_;
                g = f.gradient(&u);
            }
            None => {
                // Function values are below rounding resolution; fall back to
                // the directional derivative, which does not cancel.
                match derivative_search(f, &u, &g, &dir) {
                    Some(un) => {
                        fu = f.value(&un);
                        g = f.gradient(&un);
                        u = un;
                    }
                    None => {
                        return NewtonOutcome { point: u, gradient: g, iterations: it + 1, converged: false };
                    }
                }
            }
        }
    }
    let converged = g.norm() <= opts.tol || stop(&u, &g);
    NewtonOutcome { point: u, gradient: g, iterations: opts.max_iter, converged }
}

fn line_search<F: Smooth + ?Sized>(f: &F, u: &Point, fu: f64, g: &Point, dir: &Point) -> Option<(Point, f64)> {
    let slope = g.dot(dir);
    let mut t = 1.0;
    for _ in 0..60 {
        let cand = u + dir * t;
        let fc = f.value(&cand);
        if fc.is_finite() && fc <= fu + 1e-4 * t * slope {
            return Some((cand, fc));
        }
        t *= 0.5;
    }
    None
}

/// Line search for convex `f` that never compares function values: the
/// step ends where `∇f(u + t·dir)·dir` has risen to half its size at `t = 0`,
/// or at `t = 1` if the slope is still negative there.
fn derivative_search<F: Smooth + ?Sized>(f: &F, u: &Point, g: &Point, dir: &Point) -> Option<Point> {
    let d0 = g.dot(dir);
    if !(d0 < 0.0) {
        return None;
    }
    let slope = |t: f64| f.gradient(&(u + dir * t)).dot(dir);
    if slope(1.0) <= 0.0 {
        return Some(u + dir);
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        let s = slope(mid);
        if s.abs() <= 0.5 * d0.abs() {
            return Some(u + dir * mid);
        }
        if s < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (lo > 0.0).then(|| u + dir * lo)
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Quartic;

    impl Smooth for Quartic {
        fn value(&self, u: &Point) -> f64 {
            u.iter().map(|x| x.powi(4) / 4.0 + x * x / 2.0 - x).sum()
        }
        fn gradient(&self, u: &Point) -> Point {
            u.map(|x| x.powi(3) + x - 1.0)
        }
        fn hessian(&self, u: &Point) -> Matrix {
            Matrix::from_diagonal(&u.map(|x| 3.0 * x * x + 1.0))
        }
    }

    #[test]
    fn newton_finds_root_of_cubic_stationarity() {
        let out = minimize(&Quartic, Point::from_element(3, 10.0), NewtonOptions::default(), |_, _| false);
        assert!(out.converged);
        for x in out.point.iter() {
            assert!((x.powi(3) + x - 1.0).abs() <= 1e-10);
        }
    }

    #[test]
    fn shifted_solve_handles_singular_matrix() {
        let h = Matrix::zeros(2, 2);
        let x = shifted_solve(&h, &Point::from_vec(vec![1.0, 2.0])).unwrap();
        assert!(x.iter().all(|v| v.is_finite()));
    }
}
