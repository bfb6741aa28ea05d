use std::sync::Arc;

use nalgebra::QR;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{LogSumExpParams, LogisticParams, Objective, PowerParams, Problem, QuadraticParams};
use crate::linalg::{self, NewtonOptions, Smooth};
use crate::{Error, Matrix, Point, Result};

fn gaussian_vector(rng: &mut ChaCha8Rng, n: usize) -> Point {
    Point::from_fn(n, |_, _| StandardNormal.sample(rng))
}

fn gaussian_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

/// Point at distance `radius` from `center` in a random direction.
fn start_point(rng: &mut ChaCha8Rng, center: &Point, radius: f64) -> Point {
    let mut u = gaussian_vector(rng, center.len());
    let n = u.norm();
    if n > 0.0 {
        u /= n;
    }
    center + u * radius
}

fn require(cond: bool, msg: &str) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::InvalidConfig(msg.to_string()))
    }
}

// ---------------------------------------------------------------------------

/// `Φ(x) = ½(x-c)ᵀQ(x-c)`.
///
/// Lipschitz constants: `ℓ₁ = λ_max(Q)`. Higher derivatives vanish, so every
/// positive number is a valid `ℓ₂`, `ℓ₃`; the builder reports a nominal value.
pub struct Quadratic {
    q: Matrix,
    center: Point,
}

impl Quadratic {
    pub fn new(q: Matrix, center: Point) -> Self {
        Self { q, center }
    }

    /// Wraps the quadratic as a problem with `ℓ₂ = ℓ₃ = 1`.
    pub fn problem(q: Matrix, center: Point) -> Problem {
        let lmax = q.symmetric_eigenvalues().max();
        let start = center.map(|c| c + 1.0);
        Problem::new("quadratic", Arc::new(Self::new(q, center.clone())), [lmax, 1.0, 1.0])
            .with_minimizer(center, 0.0)
            .with_start(start)
    }
}

impl Objective for Quadratic {
    fn dim(&self) -> usize {
        self.center.len()
    }

    fn value(&self, x: &Point) -> f64 {
        let d = x - &self.center;
        0.5 * d.dot(&(&self.q * &d))
    }

    fn gradient(&self, x: &Point) -> Point {
        &self.q * (x - &self.center)
    }

    fn hessian(&self, _x: &Point) -> Matrix {
        self.q.clone()
    }

    fn third_action(&self, _x: &Point, _u: &Point, _w: &Point) -> Point {
        Point::zeros(self.dim())
    }

    fn excess(&self, x: &Point, min_value: f64) -> f64 {
        self.value(x) - min_value
    }
}

pub(super) fn build_quadratic(p: &QuadraticParams, seed: u64) -> Result<Problem> {
    require(p.dim >= 1, "quadratic: dim must be >= 1")?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let eig: Vec<f64> = match &p.eigenvalues {
        Some(e) => {
            require(e.len() == p.dim, "quadratic: eigenvalues length must equal dim")?;
            require(e.iter().all(|&v| v > 0.0), "quadratic: eigenvalues must be positive")?;
            e.clone()
        }
        None => {
            require(p.condition >= 1.0, "quadratic: condition must be >= 1")?;
            (0..p.dim)
                .map(|i| {
                    let frac = if p.dim == 1 { 1.0 } else { i as f64 / (p.dim - 1) as f64 };
                    p.condition.powf(frac - 1.0)
                })
                .collect()
        }
    };
    require(p.nominal_ell > 0.0, "quadratic: nominal_ell must be positive")?;
    let diag = Matrix::from_diagonal(&Point::from_vec(eig.clone()));
    let q = if p.rotate {
        let u = QR::new(gaussian_matrix(&mut rng, p.dim, p.dim)).q();
        let m = &u * diag * u.transpose();
        (&m + m.transpose()) * 0.5
    } else {
        diag
    };
    let center = gaussian_vector(&mut rng, p.dim);
    let start = start_point(&mut rng, &center, p.start_radius);
    let lmax = eig.iter().cloned().fold(0.0, f64::max);
    Ok(Problem::new("quadratic", Arc::new(Quadratic::new(q, center.clone())), [lmax, p.nominal_ell, p.nominal_ell])
        .with_minimizer(center, 0.0)
        .with_start(start))
}

// ---------------------------------------------------------------------------

/// `Φ(x) = log Σ_i e^{-b_i} (e^{z_i} + e^{-z_i})` with `z = A(x - c)`.
///
/// The `±a_i` pairing puts the minimizer at `c`. With `R = max_i ‖a_i‖`,
/// directional derivatives of order k are central moments of a variable
/// supported in `[-R, R]`, which gives `ℓ₁ = min(R², ‖A‖²)`, `ℓ₂ = 2R³`,
/// `ℓ₃ = 4R⁴`.
pub struct LogSumExp {
    a: Matrix,
    b: Point,
    center: Point,
}

impl LogSumExp {
    pub fn new(a: Matrix, b: Point, center: Point) -> Self {
        assert_eq!(a.ncols(), center.len());
        assert_eq!(a.nrows(), b.len());
        Self { a, b, center }
    }

    pub fn problem(a: Matrix, b: Point, center: Point) -> Problem {
        let ell = Self::lipschitz_constants(&a);
        let obj = Self::new(a, b, center.clone());
        let min = obj.value(&center);
        let start = center.map(|c| c + 1.0);
        Problem::new("log_sum_exp", Arc::new(obj), ell).with_minimizer(center, min).with_start(start)
    }

    fn lipschitz_constants(a: &Matrix) -> [f64; 3] {
        let r = a.row_iter().map(|row| row.norm()).fold(0.0, f64::max);
        let spec = a.singular_values().max();
        [(r * r).min(spec * spec), 2.0 * r.powi(3), 4.0 * r.powi(4)]
    }

    /// Signed terms `s_j = ±a_i` with weights `π_j` (softmax, max-shifted).
    fn weights(&self, x: &Point) -> (Point, Point) {
        let z = &self.a * (x - &self.center);
        let m = self.b.len();
        let mut logits = Point::zeros(2 * m);
        for i in 0..m {
            logits[2 * i] = z[i] - self.b[i];
            logits[2 * i + 1] = -z[i] - self.b[i];
        }
        let mx = logits.max();
        let e = logits.map(|l| (l - mx).exp());
        let s = e.sum();
        (e / s, z)
    }

    fn signed_row(&self, j: usize) -> Point {
        let row = self.a.row(j / 2).transpose();
        if j.is_multiple_of(2) {
            row
        } else {
            -row
        }
    }
}

impl Objective for LogSumExp {
    fn dim(&self) -> usize {
        self.center.len()
    }

    fn value(&self, x: &Point) -> f64 {
        let z = &self.a * (x - &self.center);
        let m = self.b.len();
        let mut mx = f64::NEG_INFINITY;
        for i in 0..m {
            mx = mx.max(z[i].abs() - self.b[i]);
        }
        let mut s = 0.0;
        for i in 0..m {
            s += (z[i] - self.b[i] - mx).exp() + (-z[i] - self.b[i] - mx).exp();
        }
        mx + s.ln()
    }

    fn gradient(&self, x: &Point) -> Point {
        let (pi, _) = self.weights(x);
        let m = self.b.len();
        let coef = Point::from_fn(m, |i, _| pi[2 * i] - pi[2 * i + 1]);
        self.a.transpose() * coef
    }

    fn hessian(&self, x: &Point) -> Matrix {
        let (pi, _) = self.weights(x);
        let m = self.b.len();
        let mass = Point::from_fn(m, |i, _| pi[2 * i] + pi[2 * i + 1]);
        let coef = Point::from_fn(m, |i, _| pi[2 * i] - pi[2 * i + 1]);
        let mean = self.a.transpose() * coef;
        let weighted = Matrix::from_fn(m, self.dim(), |i, j| mass[i] * self.a[(i, j)]);
        let h = self.a.transpose() * weighted - &mean * mean.transpose();
        (&h + h.transpose()) * 0.5
    }

    fn third_action(&self, x: &Point, u: &Point, w: &Point) -> Point {
        let (pi, _) = self.weights(x);
        let n = self.dim();
        let mut mean = Point::zeros(n);
        for j in 0..pi.len() {
            mean += self.signed_row(j) * pi[j];
        }
        let mu_u = mean.dot(u);
        let mu_w = mean.dot(w);
        let mut out = Point::zeros(n);
        for j in 0..pi.len() {
            let s = self.signed_row(j);
            let c = pi[j] * (s.dot(u) - mu_u) * (s.dot(w) - mu_w);
            out += (s - &mean) * c;
        }
        out
    }

    fn excess(&self, x: &Point, min_value: f64) -> f64 {
        // log(Σ w_i cosh z_i / Σ w_i) with cosh z - 1 = 2 sinh²(z/2).
        let z = &self.a * (x - &self.center);
        if z.amax() > 30.0 {
            return self.value(x) - min_value;
        }
        let bmin = self.b.min();
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..self.b.len() {
            let w = (bmin - self.b[i]).exp();
            let sh = (0.5 * z[i]).sinh();
            num += w * 2.0 * sh * sh;
            den += w;
        }
        (num / den).ln_1p()
    }
}

pub(super) fn build_log_sum_exp(p: &LogSumExpParams, seed: u64) -> Result<Problem> {
    require(p.dim >= 1, "log_sum_exp: dim must be >= 1")?;
    require(p.pairs >= p.dim, "log_sum_exp: pairs must be >= dim")?;
    require(p.scale > 0.0, "log_sum_exp: scale must be positive")?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = gaussian_matrix(&mut rng, p.pairs, p.dim) * (p.scale / (p.dim as f64).sqrt());
    let b = Point::from_fn(p.pairs, |_, _| rand::Rng::random::<f64>(&mut rng));
    let center = gaussian_vector(&mut rng, p.dim);
    let start = start_point(&mut rng, &center, p.start_radius);
    let ell = LogSumExp::lipschitz_constants(&a);
    let obj = LogSumExp::new(a, b, center.clone());
    let min = obj.value(&center);
    Ok(Problem::new("log_sum_exp", Arc::new(obj), ell).with_minimizer(center, min).with_start(start))
}

// ---------------------------------------------------------------------------

/// `Φ(x) = (1/n) Σ log(1 + exp(-y_i a_iᵀx)) + (μ/2)‖x‖²`.
///
/// The loss derivatives are bounded by `|ℓ''| ≤ 1/4`, `|ℓ'''| ≤ 1/(6√3)`,
/// `|ℓ''''| ≤ 1/8`, which gives `ℓ₁ = ‖A‖²/(4n) + μ`,
/// `ℓ₂ = Σ‖a_i‖³/(6√3 n)` and `ℓ₃ = Σ‖a_i‖⁴/(8n)`.
pub struct Logistic {
    /// Rows are `y_i a_i`.
    rows: Matrix,
    ridge: f64,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn softplus_neg(z: f64) -> f64 {
    // log(1 + e^{-z})
    (-z).max(0.0) + (-z.abs()).exp().ln_1p()
}

impl Logistic {
    pub fn new(rows: Matrix, ridge: f64) -> Self {
        Self { rows, ridge }
    }

    fn n(&self) -> f64 {
        self.rows.nrows() as f64
    }

    fn lipschitz_constants(&self) -> [f64; 3] {
        let n = self.n();
        let spec = self.rows.singular_values().max();
        let norms: Vec<f64> = self.rows.row_iter().map(|r| r.norm()).collect();
        [
            spec * spec / (4.0 * n) + self.ridge,
            norms.iter().map(|r| r.powi(3)).sum::<f64>() / (6.0 * 3f64.sqrt() * n),
            norms.iter().map(|r| r.powi(4)).sum::<f64>() / (8.0 * n),
        ]
    }
}

impl Objective for Logistic {
    fn dim(&self) -> usize {
        self.rows.ncols()
    }

    fn value(&self, x: &Point) -> f64 {
        let z = &self.rows * x;
        z.iter().map(|&zi| softplus_neg(zi)).sum::<f64>() / self.n() + 0.5 * self.ridge * x.norm_squared()
    }

    fn gradient(&self, x: &Point) -> Point {
        let z = &self.rows * x;
        let c = z.map(|zi| -sigmoid(-zi) / self.n());
        self.rows.transpose() * c + x * self.ridge
    }

    fn hessian(&self, x: &Point) -> Matrix {
        let z = &self.rows * x;
        let d = self.dim();
        let weighted = Matrix::from_fn(self.rows.nrows(), d, |i, j| {
            let s = sigmoid(z[i]);
            s * (1.0 - s) / self.n() * self.rows[(i, j)]
        });
        let mut h = self.rows.transpose() * weighted;
        for i in 0..d {
            h[(i, i)] += self.ridge;
        }
        (&h + h.transpose()) * 0.5
    }

    fn third_action(&self, x: &Point, u: &Point, w: &Point) -> Point {
        let z = &self.rows * x;
        let ru = &self.rows * u;
        let rw = &self.rows * w;
        let c = Point::from_fn(z.len(), |i, _| {
            let s = sigmoid(z[i]);
            s * (1.0 - s) * (1.0 - 2.0 * s) * ru[i] * rw[i] / self.n()
        });
        self.rows.transpose() * c
    }
}

struct ObjectiveAsSmooth<'a>(&'a dyn Objective);

impl Smooth for ObjectiveAsSmooth<'_> {
    fn value(&self, u: &Point) -> f64 {
        self.0.value(u)
    }
    fn gradient(&self, u: &Point) -> Point {
        self.0.gradient(u)
    }
    fn hessian(&self, u: &Point) -> Matrix {
        self.0.hessian(u)
    }
}

pub(super) fn build_logistic(p: &LogisticParams, seed: u64) -> Result<Problem> {
    require(p.dim >= 1 && p.samples >= 1, "logistic: dim and samples must be >= 1")?;
    require(p.ridge > 0.0, "logistic: ridge must be positive")?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let design = gaussian_matrix(&mut rng, p.samples, p.dim);
    let planted = gaussian_vector(&mut rng, p.dim);
    let mut rows = design.clone();
    for i in 0..p.samples {
        let prob = sigmoid(design.row(i).dot(&planted.transpose()));
        let y = if rand::Rng::random::<f64>(&mut rng) < prob { 1.0 } else { -1.0 };
        for j in 0..p.dim {
            rows[(i, j)] *= y;
        }
    }
    let obj = Logistic::new(rows, p.ridge);
    let ell = obj.lipschitz_constants();
    // Strongly convex; Newton from the origin reaches machine precision.
    let out = linalg::minimize(
        &ObjectiveAsSmooth(&obj),
        Point::zeros(p.dim),
        NewtonOptions { tol: 1e-14, max_iter: 100 },
        |_, _| false,
    );
    let xstar = out.point;
    let gnorm = obj.gradient(&xstar).norm();
    if gnorm > 1e-10 {
        return Err(Error::InnerSolver { iterations: out.iterations, residual: gnorm });
    }
    let min = obj.value(&xstar);
    let start = start_point(&mut rng, &xstar, p.start_radius);
    Ok(Problem::new("logistic", Arc::new(obj), ell).with_minimizer(xstar, min).with_start(start))
}

// ---------------------------------------------------------------------------

/// `Φ(x) = ½‖d‖² + (κ/4)‖d‖⁴`, `d = x - c`.
///
/// On the ball `‖d‖ ≤ R`: `ℓ₁ = 1 + 3κR²`, `ℓ₂ = 6κR`, and globally
/// `ℓ₃ = 6κ` (the fourth derivative is constant).
pub struct PowerRegularized {
    kappa: f64,
    center: Point,
}

impl PowerRegularized {
    pub fn new(kappa: f64, center: Point) -> Self {
        Self { kappa, center }
    }
}

impl Objective for PowerRegularized {
    fn dim(&self) -> usize {
        self.center.len()
    }

    fn value(&self, x: &Point) -> f64 {
        let r2 = (x - &self.center).norm_squared();
        0.5 * r2 + 0.25 * self.kappa * r2 * r2
    }

    fn gradient(&self, x: &Point) -> Point {
        let d = x - &self.center;
        let r2 = d.norm_squared();
        d * (1.0 + self.kappa * r2)
    }

    fn hessian(&self, x: &Point) -> Matrix {
        let d = x - &self.center;
        let r2 = d.norm_squared();
        let n = self.dim();
        Matrix::identity(n, n) * (1.0 + self.kappa * r2) + &d * d.transpose() * (2.0 * self.kappa)
    }

    fn third_action(&self, x: &Point, u: &Point, w: &Point) -> Point {
        let d = x - &self.center;
        (w * d.dot(u) + u * d.dot(w) + &d * u.dot(w)) * (2.0 * self.kappa)
    }
}

pub(super) fn build_power(p: &PowerParams, seed: u64) -> Result<Problem> {
    require(p.dim >= 1, "power: dim must be >= 1")?;
    require(p.kappa > 0.0 && p.radius > 0.0, "power: kappa and radius must be positive")?;
    require(p.start_radius <= p.radius, "power: start_radius must lie inside radius")?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let center = gaussian_vector(&mut rng, p.dim);
    let start = start_point(&mut rng, &center, p.start_radius);
    let ell = [1.0 + 3.0 * p.kappa * p.radius * p.radius, 6.0 * p.kappa * p.radius, 6.0 * p.kappa];
    Ok(Problem::new("power", Arc::new(PowerRegularized::new(p.kappa, center.clone())), ell)
        .with_minimizer(center, 0.0)
        .with_start(start))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::ProblemSpec;

    fn all_specs() -> Vec<ProblemSpec> {
        vec![
            ProblemSpec::Quadratic(QuadraticParams { dim: 4, ..Default::default() }),
            ProblemSpec::LogSumExp(LogSumExpParams { dim: 5, pairs: 8, ..Default::default() }),
            ProblemSpec::Logistic(LogisticParams { dim: 4, samples: 30, ..Default::default() }),
            ProblemSpec::Power(PowerParams::default()),
        ]
    }

    #[test]
    fn known_minimizers_are_stationary() {
        for spec in all_specs() {
            let p = spec.build(3).unwrap();
            let g = p.gradient(p.known_minimizer().unwrap());
            assert!(g.norm() <= 1e-10, "{}: {}", p.name(), g.norm());
            assert!(p.gap(p.start()).unwrap() > 0.0);
        }
    }

    #[test]
    fn builders_are_deterministic_in_seed() {
        for spec in all_specs() {
            let a = spec.build(11).unwrap();
            let b = spec.build(11).unwrap();
            let c = spec.build(12).unwrap();
            assert_eq!(a.start(), b.start());
            assert_ne!(a.start(), c.start());
        }
    }

    #[test]
    fn log_sum_exp_excess_matches_difference() {
        let p = ProblemSpec::LogSumExp(LogSumExpParams { dim: 3, pairs: 4, ..Default::default() }).build(5).unwrap();
        let x = p.start().clone();
        let direct = p.value(&x) - p.known_min_value().unwrap();
        assert!((p.gap(&x).unwrap() - direct).abs() <= 1e-13 * (1.0 + direct.abs()));
    }

    #[test]
    fn quadratic_spectrum_and_ell() {
        let p = ProblemSpec::Quadratic(QuadraticParams { dim: 6, condition: 100.0, ..Default::default() })
            .build(1)
            .unwrap();
        let h = p.objective().hessian(p.start());
        let ev = h.symmetric_eigenvalues();
        assert!((ev.max() - 1.0).abs() < 1e-12);
        assert!((ev.min() - 0.01).abs() < 1e-12);
        assert_eq!(p.lipschitz(1).unwrap(), 1.0);
    }

    #[test]
    fn invalid_params_are_rejected() {
        let bad = ProblemSpec::LogSumExp(LogSumExpParams { dim: 5, pairs: 2, ..Default::default() });
        assert!(matches!(bad.build(0), Err(Error::InvalidConfig(_))));
        let bad = ProblemSpec::Power(PowerParams { start_radius: 5.0, ..Default::default() });
        assert!(matches!(bad.build(0), Err(Error::InvalidConfig(_))));
    }
}
