//! The continuous-time closed-loop system
//!
//! ```text
//! ẋ = -(ȧ/a)(x - v) - (ȧ²/a)∇Φ(x),   v̇ = -ȧ∇Φ(x),   ṡ = √λ,
//! a = ¼(s + c)²,  ȧ = ½√λ (s + c),  λ = θ^{1/p} ‖∇Φ(x)‖^{-(p-1)/p}
//! ```
//!
//! integrated on the augmented state `(x, v, s)`, where `s(t) = ∫₀ᵗ √λ`.

mod dopri;

use serde::{Deserialize, Serialize};

use crate::accel::audit::{AuditReport, Tally, SLACK};
use crate::oracle::Problem;
use crate::{Error, Point, Result};

/// Below this gradient norm a p ≥ 2 trajectory is stopped: λ blows up.
pub const GRAD_FLOOR: f64 = 1e-12;

/// Relative slack allowed on the `a(t)` lower bound.
pub const A_BOUND_SLACK: f64 = 1e-8;

/// Relative shortfall allowed in the integrated dissipation inequality.
pub const DISSIPATION_DELTA: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlowConfig {
    pub p: usize,
    pub theta: f64,
    pub c: f64,
    pub t_end: f64,
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub sample_stride: f64,
    /// Accepted plus rejected steps allowed before giving up.
    pub max_steps: usize,
}

impl Default for FlowConfig {
    fn default() -> Self {
        Self {
            p: 1,
            theta: 0.5,
            c: 1.0,
            t_end: 50.0,
            abs_tol: 1e-9,
            rel_tol: 1e-9,
            sample_stride: 0.05,
            max_steps: 2_000_000,
        }
    }
}

impl FlowConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.p == 0 {
            return bad("flow order p must be at least 1");
        }
        if !(self.theta > 0.0 && self.theta < 1.0) {
            return bad("flow theta must lie in (0, 1)");
        }
        if !(self.c > 0.0 && self.c.is_finite()) {
            return bad("flow c must be positive");
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return bad("t_end must be finite and nonnegative");
        }
        if !(self.abs_tol > 0.0 && self.rel_tol > 0.0) {
            return bad("integration tolerances must be positive");
        }
        if !(self.sample_stride > 0.0) {
            return bad("sample_stride must be positive");
        }
        Ok(())
    }

    /// `Λ_θ` at gradient norm `g`.
    pub fn lambda(&self, grad_norm: f64) -> Result<f64> {
        if self.p == 1 {
            return Ok(self.theta);
        }
        if !(grad_norm > 0.0) {
            return Err(Error::Stationary { grad_norm });
        }
        let p = self.p as f64;
        Ok(self.theta.powf(1.0 / p) * grad_norm.powf(-(p - 1.0) / p))
    }

    fn a(&self, s: f64) -> f64 {
        0.25 * (s + self.c).powi(2)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowState {
    pub t: f64,
    pub x: Point,
    pub v: Point,
    pub s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowDerivative {
    pub x: Point,
    pub v: Point,
    pub s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowSample {
    pub t: f64,
    pub s: f64,
    pub a: f64,
    pub a_dot: f64,
    pub lambda: f64,
    pub f_gap: f64,
    pub grad_norm_sq: f64,
    pub lyapunov: f64,
    pub algebraic_residual: f64,
    pub x: Vec<f64>,
    pub v: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowStop {
    Completed,
    /// ‖∇Φ(x)‖ fell below [`GRAD_FLOOR`] with p ≥ 2.
    GradientFloor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowTrace {
    pub samples: Vec<FlowSample>,
    pub stop: FlowStop,
    pub config: FlowConfig,
    pub steps_accepted: usize,
    pub steps_rejected: usize,
    /// Largest `|Δλ|/Δt` between consecutive samples. Heuristic only.
    pub max_lambda_rate: f64,
}

impl FlowTrace {
    pub fn last(&self) -> &FlowSample {
        self.samples.last().expect("a trace holds the initial sample")
    }
}

/// Time derivatives of the closed-loop system.
pub fn rhs(state: &FlowState, problem: &Problem, config: &FlowConfig) -> Result<FlowDerivative> {
    let g = problem.gradient(&state.x);
    derivative(&state.x, &state.v, state.s, &g, config)
}

fn derivative(x: &Point, v: &Point, s: f64, g: &Point, config: &FlowConfig) -> Result<FlowDerivative> {
    let lam = config.lambda(g.norm())?;
    let sq = lam.sqrt();
    let a = config.a(s);
    let a_dot = 0.5 * sq * (s + config.c);
    let dx = (x - v) * (-a_dot / a) - g * (a_dot * a_dot / a);
    let dv = g * -a_dot;
    Ok(FlowDerivative { x: dx, v: dv, s: sq })
}

/// Initial `v` making `ẋ(0) = 0`.
pub fn default_v0(x0: &Point, problem: &Problem, config: &FlowConfig) -> Result<Point> {
    let g = problem.gradient(x0);
    let gn = g.norm();
    if !(gn > 0.0) {
        return Err(Error::Stationary { grad_norm: gn });
    }
    let p = config.p as f64;
    let scale = 0.5 * config.c * config.theta.powf(1.0 / (2.0 * p)) * gn.powf(-(p - 1.0) / (2.0 * p));
    Ok(x0 + g * scale)
}

/// `E = a·(Φ(x) - Φ*) + ½‖v - x*‖²`.
pub fn lyapunov_continuous(a: f64, gap: f64, v: &Point, x_star: Option<&Point>) -> Result<f64> {
    let xs = x_star.ok_or(Error::UnknownMinimizer)?;
    Ok(a * gap + 0.5 * (v - xs).norm_squared())
}

/// Guaranteed growth of `a(t)` given the initial energy `e0`.
pub fn a_lower_bound(t: f64, config: &FlowConfig, e0: f64) -> f64 {
    let p = config.p as f64;
    let q = 3.0 * p + 1.0;
    let rate = config.theta.powf(2.0 / q) / ((p + 1.0) * e0.powf((p - 1.0) / q));
    let inner = 0.5 * config.c + rate.powf(q / 4.0) * t.powf(q / 4.0);
    inner * inner
}

fn sample(problem: &Problem, config: &FlowConfig, t: f64, x: &Point, v: &Point, s: f64) -> FlowSample {
    let g = problem.gradient(x);
    let gn = g.norm();
    let lambda = config.lambda(gn).unwrap_or(f64::INFINITY);
    let a = config.a(s);
    let f_gap = problem.gap(x).unwrap_or(f64::NAN);
    let p = config.p as i32;
    FlowSample {
        t,
        s,
        a,
        a_dot: 0.5 * lambda.sqrt() * (s + config.c),
        lambda,
        f_gap,
        grad_norm_sq: gn * gn,
        lyapunov: lyapunov_continuous(a, f_gap, v, problem.known_minimizer()).unwrap_or(f64::NAN),
        algebraic_residual: (lambda.powi(p) * gn.powi(p - 1) - config.theta).abs(),
        x: x.as_slice().to_vec(),
        v: v.as_slice().to_vec(),
    }
}

fn pack(x: &Point, v: &Point, s: f64) -> Point {
    let n = x.len();
    Point::from_fn(2 * n + 1, |i, _| {
        if i < n {
            x[i]
        } else if i < 2 * n {
            v[i - n]
        } else {
            s
        }
    })
}

fn unpack(y: &Point) -> (Point, Point, f64) {
    let n = (y.len() - 1) / 2;
    (y.rows(0, n).into_owned(), y.rows(n, n).into_owned(), y[2 * n])
}

fn sample_times(config: &FlowConfig) -> Vec<f64> {
    let n = (config.t_end / config.sample_stride + 1e-9).floor() as usize;
    let mut ts: Vec<f64> = (0..=n).map(|k| k as f64 * config.sample_stride).collect();
    if config.t_end - ts[n] > 1e-12 * config.t_end.max(1.0) {
        ts.push(config.t_end);
    }
    ts
}

/// Integrates from `(x0, v0, s = 0)` to `t_end`, sampling every
/// `sample_stride`. Steps are shortened to land exactly on sample times.
pub fn integrate(problem: &Problem, x0: &Point, v0: &Point, config: &FlowConfig) -> Result<FlowTrace> {
    config.validate()?;
    if x0.len() != problem.dim() || v0.len() != problem.dim() {
        return Err(Error::DimensionMismatch { expected: problem.dim(), found: x0.len().max(v0.len()) });
    }
    let g0 = problem.gradient(x0).norm();
    if !(g0 > 0.0) {
        return Err(Error::Stationary { grad_norm: g0 });
    }

    let mut f = |_: f64, y: &Point| -> Result<Point> {
        let (x, v, s) = unpack(y);
        let g = problem.gradient(&x);
        let d = derivative(&x, &v, s, &g, config)?;
        Ok(pack(&d.x, &d.v, d.s))
    };

    let times = sample_times(config);
    let mut samples = vec![sample(problem, config, 0.0, x0, v0, 0.0)];
    let (atol, rtol) = (config.abs_tol, config.rel_tol);
    let mut t = 0.0;
    let mut y = pack(x0, v0, 0.0);
    let mut fy = f(t, &y)?;
    let mut h = dopri::initial_step(&mut f, t, &y, &fy, atol, rtol, config.sample_stride)?;
    let mut ctl = dopri::Controller::new();
    let (mut accepted, mut rejected) = (0, 0);
    let mut stop = FlowStop::Completed;

    'outer: for &target in times.iter().skip(1) {
        while t < target {
            dopri::check_underflow(t, h)?;
            if accepted + rejected >= config.max_steps {
                return Err(Error::StepBudgetExhausted { t, steps: accepted + rejected });
            }
            let landing = t + h >= target;
            let step = if landing { target - t } else { h };
            let trial = match dopri::trial(&mut f, t, &y, &fy, step, atol, rtol) {
                Ok(tr) => tr,
                Err(Error::Stationary { .. }) => {
                    stop = FlowStop::GradientFloor;
                    break 'outer;
                }
                Err(e) => return Err(e),
            };
            let (h_new, ok) = ctl.next(step, trial.err);
            if !ok {
                rejected += 1;
                h = h_new;
                continue;
            }
            accepted += 1;
            t = if landing { target } else { t + step };
            y = trial.y;
            fy = trial.f;
            // A landing step is often artificially short; keep the larger proposal.
            h = if landing { h_new.max(h) } else { h_new };

            let (x, v, s) = unpack(&y);
            if config.p >= 2 && problem.gradient(&x).norm() < GRAD_FLOOR {
                samples.push(sample(problem, config, t, &x, &v, s));
                stop = FlowStop::GradientFloor;
                break 'outer;
            }
        }
        let (x, v, s) = unpack(&y);
        samples.push(sample(problem, config, t, &x, &v, s));
    }
    if stop == FlowStop::GradientFloor && samples.last().map(|s| s.t) != Some(t) {
        let (x, v, s) = unpack(&y);
        samples.push(sample(problem, config, t, &x, &v, s));
    }

    let max_lambda_rate = samples
        .windows(2)
        .map(|w| (w[1].lambda - w[0].lambda).abs() / (w[1].t - w[0].t))
        .filter(|r| r.is_finite())
        .fold(0.0, f64::max);

    Ok(FlowTrace {
        samples,
        stop,
        config: config.clone(),
        steps_accepted: accepted,
        steps_rejected: rejected,
        max_lambda_rate,
    })
}

/// Checks a sampled trajectory against the continuous-time guarantees:
/// the feedback law, `a = ¼(s + c)²`, energy decrease, integrated
/// dissipation and the growth bound on `a`.
pub fn audit_flow(samples: &[FlowSample], config: &FlowConfig, residual_tol: f64) -> AuditReport {
    let mut residual = Tally::new("algebraic_residual");
    let mut a_def = Tally::new("a_definition");
    let mut energy = Tally::new("lyapunov_monotone");
    let mut dissip = Tally::new("cumulative_dissipation");
    let mut bound = Tally::new("a_lower_bound");

    let e0 = samples.first().map_or(f64::NAN, |s| s.lyapunov);
    let integrand = |s: &FlowSample| s.a * s.lambda * s.grad_norm_sq;
    let mut integral = 0.0;

    for (k, cur) in samples.iter().enumerate() {
        residual.le(k, cur.algebraic_residual, residual_tol);
        let a = config.a(cur.s);
        a_def.le(k, (cur.a - a).abs(), 1e-14 * a);
        if e0.is_finite() {
            let lb = a_lower_bound(cur.t, config, e0);
            bound.le(k, lb * (1.0 - A_BOUND_SLACK), cur.a);
        }
        if k == 0 || !e0.is_finite() {
            continue;
        }
        let prev = &samples[k - 1];
        energy.le(k, cur.lyapunov, prev.lyapunov + SLACK * (1.0 + e0));
        integral += 0.5 * (cur.t - prev.t) * (integrand(prev) + integrand(cur));
        bound_dissipation(&mut dissip, k, integral, e0 - cur.lyapunov);
    }

    let mut checks = vec![residual.finish(), a_def.finish()];
    if e0.is_finite() {
        checks.extend([energy.finish(), dissip.finish(), bound.finish()]);
    }
    AuditReport { checks }
}

fn bound_dissipation(t: &mut Tally, k: usize, integral: f64, decrease: f64) {
    t.le(k, (1.0 - DISSIPATION_DELTA) * integral, decrease + SLACK * (1.0 + decrease.abs()));
}
