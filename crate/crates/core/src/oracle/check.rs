use super::Problem;
use crate::{Matrix, Point};

/// Largest relative discrepancy between analytic derivatives and central
/// differences of the next-lower order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivativeReport {
    pub gradient: f64,
    pub hessian: f64,
    pub third: f64,
}

impl DerivativeReport {
    pub fn passes(&self, grad_tol: f64, hess_tol: f64) -> bool {
        self.gradient <= grad_tol && self.hessian <= hess_tol
    }
}

fn relative(err: f64, scale: f64) -> f64 {
    err / scale.max(1.0)
}

/// Compares analytic derivatives at `x` with central differences of step
/// `step`. Errors are `max |analytic - fd| / max(1, max |analytic|)`.
pub fn check_derivatives(problem: &Problem, x: &Point, step: f64) -> DerivativeReport {
    assert!(step > 0.0, "step must be positive");
    let obj = problem.objective();
    let n = x.len();
    let h2 = 2.0 * step;

    let g = obj.gradient(x);
    let h = obj.hessian(x);
    let mut gerr: f64 = 0.0;
    let mut herr: f64 = 0.0;
    let mut tscale: f64 = 0.0;
    let mut tdiff: f64 = 0.0;

    for j in 0..n {
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[j] += step;
        xm[j] -= step;

        let fd = (obj.value(&xp) - obj.value(&xm)) / h2;
        gerr = gerr.max((fd - g[j]).abs());

        let col = (obj.gradient(&xp) - obj.gradient(&xm)) / h2;
        herr = herr.max((col - h.column(j)).amax());

        let hd: Matrix = (obj.hessian(&xp) - obj.hessian(&xm)) / h2;
        let ej = Point::from_fn(n, |i, _| if i == j { 1.0 } else { 0.0 });
        for i in 0..n {
            let ei = Point::from_fn(n, |k, _| if k == i { 1.0 } else { 0.0 });
            let t = obj.third_action(x, &ej, &ei);
            tscale = tscale.max(t.amax());
            tdiff = tdiff.max((t - hd.column(i)).amax());
        }
    }

    DerivativeReport {
        gradient: relative(gerr, g.amax()),
        hessian: relative(herr, h.amax()),
        third: relative(tdiff, tscale),
    }
}
