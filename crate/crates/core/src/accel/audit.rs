//! Replays a trace and checks every per-iteration condition and bound the
//! framework guarantees.
//!
//! Inequalities from the convergence analysis get additive slack
//! `1e-9·(1 + |rhs|)`; algebraic recurrences must hold to `1e-12` relative.

use serde::{Deserialize, Serialize};

use super::{hpe_check, IterateRecord, RunMeta};
use crate::oracle::Problem;
use crate::stepsize::{large_step_check, StepClass, Variant};
use crate::Point;

pub const SLACK: f64 = 1e-9;
pub const RECURRENCE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub checked: usize,
    pub failures: usize,
    pub first_failure: Option<usize>,
    /// Largest `lhs - allowed` seen; negative when every instance passed.
    /// `None` when nothing was checked or a compared value was NaN.
    pub worst_excess: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub checks: Vec<CheckOutcome>,
}

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn get(&self, name: &str) -> Option<&CheckOutcome> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn failed(&self) -> Vec<&str> {
        self.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect()
    }
}

pub(crate) struct Tally {
    name: &'static str,
    checked: usize,
    failures: usize,
    first: Option<usize>,
    worst: f64,
}

impl Tally {
    pub(crate) fn new(name: &'static str) -> Self {
        Self { name, checked: 0, failures: 0, first: None, worst: f64::NEG_INFINITY }
    }

    /// Records `lhs ≤ allowed` at iteration `k`.
    pub(crate) fn le(&mut self, k: usize, lhs: f64, allowed: f64) {
        self.checked += 1;
        let excess = lhs - allowed;
        if excess.is_nan() || excess > 0.0 {
            self.failures += 1;
            self.first.get_or_insert(k);
        }
        if excess.is_nan() {
            self.worst = f64::NAN;
        } else if !self.worst.is_nan() {
            self.worst = self.worst.max(excess);
        }
    }

    pub(crate) fn finish(self) -> CheckOutcome {
        CheckOutcome {
            name: self.name.to_string(),
            passed: self.failures == 0,
            checked: self.checked,
            failures: self.failures,
            first_failure: self.first,
            worst_excess: (self.checked > 0 && !self.worst.is_nan()).then_some(self.worst),
        }
    }
}

pub(crate) fn slack(rhs: f64) -> f64 {
    SLACK * (1.0 + rhs.abs())
}

fn pt(v: &[f64]) -> Point {
    Point::from_vec(v.to_vec())
}

fn ratio_exponent(p: usize) -> f64 {
    (3 * p + 1) as f64 / 2.0
}

/// Conditions every accepted step of the framework must meet: the HPE
/// inequality, `m_k ≥ θ` and the coupling recurrences. Used to confirm that
/// a tensor trace is a valid run of the generic framework.
pub fn check_framework(records: &[IterateRecord], variant: Variant, p: usize, theta: f64, sigma: f64) -> AuditReport {
    let mut hpe = Tally::new("hpe");
    let mut large = Tally::new("large_step_lower");
    let mut rec = Tally::new("recurrence");
    for w in records.windows(2) {
        let (prev, cur) = (&w[0], &w[1]);
        let h = step_hpe(cur, sigma);
        hpe.le(cur.k, h.0, h.1 + 1e-14);
        let m = step_m(cur, p);
        large.le(cur.k, theta, m);
        recurrences(&mut rec, variant, prev, cur);
    }
    AuditReport { checks: vec![hpe.finish(), large.finish(), rec.finish()] }
}

fn step_hpe(r: &IterateRecord, sigma: f64) -> (f64, f64) {
    let c = hpe_check(r.lambda, &pt(&r.w), &pt(&r.x), &pt(&r.tilde_v), r.eps, sigma);
    (c.lhs, c.rhs)
}

fn step_m(r: &IterateRecord, p: usize) -> f64 {
    crate::stepsize::large_step_value(p, r.lambda, (pt(&r.x) - pt(&r.tilde_v)).norm())
}

fn recurrences(t: &mut Tally, variant: Variant, prev: &IterateRecord, cur: &IterateRecord) {
    let k = cur.k;
    let (x0, v0) = (pt(&prev.x), pt(&prev.v));
    let (tv, v1, w) = (pt(&cur.tilde_v), pt(&cur.v), pt(&cur.w));
    let lam = cur.lambda;
    let (tv_expect, mult, quad_res, quad_scale) = match variant {
        Variant::CafI => {
            let a_prev = prev.accumulator;
            let a = cur.accumulator - a_prev;
            let tv_e = (&x0 * a_prev + &v0 * a) / (a_prev + a);
            (tv_e, a, a * a - lam * (a_prev + a), a * a)
        }
        Variant::CafII => {
            let g_prev = prev.accumulator;
            let g = cur.accumulator;
            // 1 - α = γ_k/γ_{k-1}, taken directly to avoid cancellation as α → 1.
            let keep = g / g_prev;
            let alpha = 1.0 - keep;
            let tv_e = &x0 * keep + &v0 * alpha;
            (tv_e, alpha / g, alpha * alpha - lam * keep * g_prev, alpha * alpha)
        }
    };
    t.le(k, quad_res.abs(), RECURRENCE_TOL * quad_scale);
    let scale = x0.norm().max(v0.norm()).max(tv.norm());
    t.le(k, (&tv - tv_expect).norm(), RECURRENCE_TOL * scale);
    let v_expect = &v0 - &w * mult;
    t.le(k, (&v1 - v_expect).norm(), RECURRENCE_TOL * (v0.norm() + mult * w.norm()));
}

/// Full audit of a discrete trace. With `problem` given, tensor traces are
/// also checked for `w_k = ∇Φ(x_k)`.
pub fn audit(records: &[IterateRecord], meta: &RunMeta, problem: Option<&Problem>) -> AuditReport {
    let p = meta.p;
    let sigma = meta.sigma;
    let s2 = 1.0 - sigma * sigma;
    let q = ratio_exponent(p);

    let mut hpe = Tally::new("hpe");
    let mut window = Tally::new("large_step_window");
    let mut rec = Tally::new("recurrence");
    let mut energy = Tally::new("lyapunov_monotone");
    let mut dissip = Tally::new("cumulative_dissipation");
    let mut increment = Tally::new("sqrt_accumulator_increment");
    let mut bound = Tally::new(match meta.variant {
        Variant::CafI => "a_lower_bound",
        Variant::CafII => "gamma_upper_bound",
    });
    let mut gap_bound = Tally::new("gap_times_a_bound");
    let mut tensor = Tally::new("tensor_gradient_step");

    let mut dissipated = 0.0;

    for w in records.windows(2) {
        let (prev, cur) = (&w[0], &w[1]);
        let k = cur.k;

        let (lhs, rhs) = step_hpe(cur, sigma);
        hpe.le(k, lhs, rhs + 1e-14);

        let disp = (pt(&cur.x) - pt(&cur.tilde_v)).norm();
        let inside = large_step_check(cur.lambda, disp, &meta.feedback) == StepClass::Inside;
        window.le(k, if inside { 0.0 } else { 1.0 }, 0.0);

        recurrences(&mut rec, meta.variant, prev, cur);

        if let Some(e0) = meta.energy0 {
            energy.le(k, cur.lyapunov, prev.lyapunov + SLACK * (1.0 + e0));

            let weight = match meta.variant {
                Variant::CafI => cur.accumulator / cur.lambda,
                Variant::CafII => 1.0 / (cur.lambda * cur.accumulator),
            };
            dissipated += 0.5 * s2 * weight * disp * disp;
            let rhs = e0 - cur.lyapunov;
            dissip.le(k, dissipated, rhs + slack(rhs));
        }

        let (sq_prev, sq_cur) = match meta.variant {
            Variant::CafI => (prev.accumulator.sqrt(), cur.accumulator.sqrt()),
            Variant::CafII => ((1.0 / prev.accumulator).sqrt(), (1.0 / cur.accumulator).sqrt()),
        };
        let need = sq_prev + 0.5 * cur.lambda.sqrt();
        increment.le(k, need, sq_cur + slack(sq_cur));

        let kf = k as f64;
        match meta.variant {
            Variant::CafI => {
                if let Some(d2) = meta.dist0_sq {
                    let dist_pow = if p == 1 { 1.0 } else { d2.sqrt().powi(p as i32 - 1) };
                    let lower =
                        meta.feedback.theta * s2.powf((p as f64 - 1.0) / 2.0) / ((p + 1) as f64).powf(q) / dist_pow
                            * kf.powf(q);
                    bound.le(k, lower, cur.accumulator + slack(cur.accumulator));
                    let half = 0.5 * d2;
                    gap_bound.le(k, cur.f_gap * cur.accumulator, half + slack(half));
                }
            }
            Variant::CafII => {
                if let Some(e0) = meta.energy0 {
                    let upper = ((p + 1) as f64).powf(q) / meta.feedback.theta
                        * (2.0 * e0 / s2).powf((p as f64 - 1.0) / 2.0)
                        * kf.powf(-q);
                    bound.le(k, cur.accumulator, upper + slack(upper));
                }
            }
        }

        if meta.algorithm.is_tensor() {
            tensor.le(k, cur.eps.abs(), 0.0);
            let wv = pt(&cur.w);
            match problem {
                Some(prob) => {
                    let g = prob.gradient(&pt(&cur.x));
                    tensor.le(k, (&wv - &g).norm(), RECURRENCE_TOL * g.norm());
                }
                None => {
                    let n2 = wv.norm_squared();
                    tensor.le(k, (n2 - cur.grad_norm_sq).abs(), RECURRENCE_TOL * cur.grad_norm_sq);
                }
            }
        }
    }

    let mut checks = vec![hpe.finish(), window.finish(), rec.finish(), increment.finish(), bound.finish()];
    if meta.energy0.is_some() {
        checks.push(energy.finish());
        checks.push(dissip.finish());
    }
    if meta.variant == Variant::CafI && meta.dist0_sq.is_some() {
        checks.push(gap_bound.finish());
    }
    if meta.algorithm.is_tensor() {
        checks.push(tensor.finish());
    }
    AuditReport { checks }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::accel::{run, Algorithm, SolverConfig};
    use crate::oracle::{LogSumExpParams, ProblemSpec, QuadraticParams};

    fn problems() -> Vec<Problem> {
        vec![
            ProblemSpec::Quadratic(QuadraticParams { dim: 4, condition: 100.0, ..Default::default() })
                .build(1)
                .unwrap(),
            ProblemSpec::LogSumExp(LogSumExpParams { dim: 4, pairs: 8, ..Default::default() }).build(1).unwrap(),
        ]
    }

    #[test]
    fn clean_runs_pass_full_audit() {
        for prob in problems() {
            for a in Algorithm::ALL {
                for p in 1..=2 {
                    let cfg = SolverConfig { p, max_iter: 40, ..Default::default() };
                    let r = run(a, &prob, &cfg).unwrap();
                    let rep = audit(&r.records, &r.meta, Some(&prob));
                    assert!(rep.passed(), "{} {a:?} p={p}: {:?}", prob.name(), rep.failed());
                }
            }
        }
    }

    #[test]
    fn tampered_trace_is_caught() {
        let prob = &problems()[0];
        let cfg = SolverConfig { p: 2, max_iter: 10, ..Default::default() };
        let r = run(Algorithm::Tensor2, prob, &cfg).unwrap();

        let mut bad = r.records.clone();
        bad[3].lambda *= 1.5;
        let rep = audit(&bad, &r.meta, Some(prob));
        assert!(!rep.get("recurrence").unwrap().passed);

        let mut bad = r.records.clone();
        bad[4].w[0] += 1.0;
        let rep = audit(&bad, &r.meta, Some(prob));
        assert!(!rep.get("tensor_gradient_step").unwrap().passed);

        let mut bad = r.records.clone();
        bad[5].lyapunov = bad[4].lyapunov + 1.0;
        assert!(!audit(&bad, &r.meta, None).get("lyapunov_monotone").unwrap().passed);
    }

    #[test]
    fn framework_checker_accepts_tensor_traces() {
        for prob in problems() {
            for a in [Algorithm::Tensor1, Algorithm::Tensor2] {
                let cfg = SolverConfig { p: 2, max_iter: 30, ..Default::default() };
                let r = run(a, &prob, &cfg).unwrap();
                let rep = check_framework(&r.records, a.variant(), 2, r.meta.feedback.theta, r.meta.sigma);
                assert!(rep.passed(), "{:?}", rep.failed());
            }
        }
    }
}
