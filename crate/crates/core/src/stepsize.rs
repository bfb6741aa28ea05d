//! Feedback law, coupling recurrences and the large-step λ search.

use serde::{Deserialize, Serialize};

use crate::model::SubproblemSolution;
use crate::{factorial, Error, Point, Result};

/// Upper limit on bracket doublings in either direction.
pub const MAX_DOUBLINGS: usize = 60;

/// Hard cap on subproblem probes per outer iteration.
pub const MAX_PROBES: usize = 200;

/// Order, feedback constant θ and the large-step window `[θ_low, θ_high]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeedbackParams {
    pub p: usize,
    pub theta: f64,
    pub theta_low: f64,
    pub theta_high: f64,
}

impl FeedbackParams {
    pub fn new(p: usize, theta: f64, theta_low: f64, theta_high: f64) -> Result<Self> {
        if p == 0 {
            return Err(Error::InvalidConfig("order p must be >= 1".into()));
        }
        if !(theta_low > 0.0 && theta_low <= theta && theta <= theta_high && theta_high.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "need 0 < theta_low <= theta <= theta_high, got {theta_low}, {theta}, {theta_high}"
            )));
        }
        Ok(Self { p, theta, theta_low, theta_high })
    }

    /// Window used with σ̂-inexact solutions of the proximal subproblem:
    /// `[σ_l p!/(2ℓ), σ_u p!/(2ℓ)]`, θ at the lower end.
    pub fn inexact(p: usize, ell: f64, sigma_l: f64, sigma_u: f64) -> Result<Self> {
        let base = factorial(p) / (2.0 * ell);
        Self::new(p, sigma_l * base, sigma_l * base, sigma_u * base)
    }

    /// Window used with exact minimizers of the plain model:
    /// `[(p-1)!/(2ℓ), p!/(ℓ(p+1))]`.
    pub fn exact(p: usize, ell: f64) -> Result<Self> {
        let low = factorial(p - 1) / (2.0 * ell);
        let high = (factorial(p) / (ell * (p + 1) as f64)).max(low);
        Self::new(p, low, low, high)
    }

    /// True when θ falls outside `(0, 1)`.
    pub fn theta_outside_unit_interval(&self) -> bool {
        self.theta >= 1.0
    }
}

/// `Λ_θ = θ^{1/p} ‖∇Φ‖^{-(p-1)/p}`.
pub fn lambda_feedback(params: &FeedbackParams, grad_norm: f64) -> Result<f64> {
    let p = params.p as f64;
    if params.p == 1 {
        return Ok(params.theta);
    }
    if !(grad_norm > 0.0) {
        return Err(Error::Stationary { grad_norm });
    }
    Ok(params.theta.powf(1.0 / p) * grad_norm.powf(-(p - 1.0) / p))
}

/// Positive root of `a² = λ(A + a)`.
pub fn a_next(a_sum: f64, lambda: f64) -> f64 {
    0.5 * (lambda + (lambda * lambda + 4.0 * lambda * a_sum).sqrt())
}

/// Root in `(0, 1)` of `α² = λ(1 - α)γ`, in a form free of cancellation
/// for small `λγ`.
pub fn alpha_next(gamma: f64, lambda: f64) -> f64 {
    let c = lambda * gamma;
    2.0 * c / (c + (c * c + 4.0 * c).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepClass {
    Below,
    Inside,
    Above,
}

/// `m = λ‖x - ṽ‖^{p-1}`, with `‖·‖^0 ≡ 1`.
pub fn large_step_value(p: usize, lambda: f64, displacement: f64) -> f64 {
    if p == 1 {
        lambda
    } else {
        lambda * displacement.powi(p as i32 - 1)
    }
}

/// Classifies `m` against the closed window `[θ_low, θ_high]`.
pub fn large_step_check(lambda: f64, displacement: f64, params: &FeedbackParams) -> StepClass {
    classify(large_step_value(params.p, lambda, displacement), params)
}

fn classify(m: f64, params: &FeedbackParams) -> StepClass {
    if m < params.theta_low {
        StepClass::Below
    } else if m > params.theta_high {
        StepClass::Above
    } else {
        StepClass::Inside
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Accumulates `A_k`.
    CafI,
    /// Accumulates `γ_k`.
    CafII,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum AccumulatorState {
    CafI { a_sum: f64 },
    CafII { gamma: f64 },
}

/// Extrapolated point `ṽ` and the coupling coefficient (`a` or `α`).
#[derive(Debug, Clone, PartialEq)]
pub struct Coupling {
    pub tilde_v: Point,
    pub coef: f64,
}

impl AccumulatorState {
    pub fn initial(variant: Variant) -> Self {
        match variant {
            Variant::CafI => AccumulatorState::CafI { a_sum: 0.0 },
            Variant::CafII => AccumulatorState::CafII { gamma: 1.0 },
        }
    }

    pub fn variant(&self) -> Variant {
        match self {
            AccumulatorState::CafI { .. } => Variant::CafI,
            AccumulatorState::CafII { .. } => Variant::CafII,
        }
    }

    /// `A_k` or `γ_k`.
    pub fn value(&self) -> f64 {
        match *self {
            AccumulatorState::CafI { a_sum } => a_sum,
            AccumulatorState::CafII { gamma } => gamma,
        }
    }

    /// Weight on the gap in the discrete energy: `A_k` or `1/γ_k`.
    pub fn energy_weight(&self) -> f64 {
        match *self {
            AccumulatorState::CafI { a_sum } => a_sum,
            AccumulatorState::CafII { gamma } => 1.0 / gamma,
        }
    }

    pub fn couple(&self, lambda: f64, x: &Point, v: &Point) -> Coupling {
        match *self {
            AccumulatorState::CafI { a_sum } => {
                let a = a_next(a_sum, lambda);
                let tilde_v = (x * a_sum + v * a) / (a_sum + a);
                Coupling { tilde_v, coef: a }
            }
            AccumulatorState::CafII { gamma } => {
                let alpha = alpha_next(gamma, lambda);
                let tilde_v = x * (1.0 - alpha) + v * alpha;
                Coupling { tilde_v, coef: alpha }
            }
        }
    }

    /// State after accepting `λ` with coupling coefficient `coef`, plus the
    /// multiplier `s` of the dual update `v ← v - s·w`.
    pub fn advance(&self, lambda: f64, coef: f64) -> (Self, f64) {
        match *self {
            AccumulatorState::CafI { a_sum } => (AccumulatorState::CafI { a_sum: a_sum + coef }, coef),
            AccumulatorState::CafII { .. } => {
                // α² = λ(1-α)γ, so (1-α)γ = α²/λ without cancellation.
                let gamma = coef * coef / lambda;
                (AccumulatorState::CafII { gamma }, coef / gamma)
            }
        }
    }
}

/// Output of one approximate proximal step at `(λ, ṽ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProximalStep {
    pub x: Point,
    pub w: Point,
    pub eps: f64,
    pub solution: SubproblemSolution,
}

/// Produces the triple `(x, w, ε)` for a trial `λ` and extrapolation `ṽ`.
pub trait ProximalOracle {
    fn step(&self, lambda: f64, tilde_v: &Point) -> Result<ProximalStep>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct BisectionOutcome {
    pub lambda: f64,
    pub step: ProximalStep,
    pub coupling: Coupling,
    pub large_step_value: f64,
    /// Subproblem solves spent on the search (0 for p = 1).
    pub probes: usize,
}

/// Finds `λ` whose step lands in the large-step window.
///
/// For `p = 1` the answer is `θ_low`. Otherwise the search starts at
/// `start`, doubles or halves until the window is bracketed, then bisects on
/// `log λ`.
pub fn bisect_lambda<O: ProximalOracle + ?Sized>(
    acc: &AccumulatorState,
    x: &Point,
    v: &Point,
    oracle: &O,
    params: &FeedbackParams,
    start: f64,
) -> Result<BisectionOutcome> {
    let probe = |lambda: f64| -> Result<(Coupling, ProximalStep, f64)> {
        let c = acc.couple(lambda, x, v);
        let s = oracle.step(lambda, &c.tilde_v)?;
        let m = large_step_value(params.p, lambda, (&s.x - &c.tilde_v).norm());
        Ok((c, s, m))
    };
    let done = |lambda: f64, (coupling, step, m): (Coupling, ProximalStep, f64), probes: usize| BisectionOutcome {
        lambda,
        step,
        coupling,
        large_step_value: m,
        probes,
    };

    if params.p == 1 {
        return Ok(done(params.theta_low, probe(params.theta_low)?, 0));
    }
    if !(start > 0.0 && start.is_finite()) {
        return Err(Error::InvalidConfig(format!("initial lambda must be positive, got {start}")));
    }

    let mut probes = 1;
    let mut lambda = start;
    let mut trial = probe(lambda)?;
    let first = classify(trial.2, params);
    if first == StepClass::Inside {
        return Ok(done(lambda, trial, probes));
    }

    // Bracket: lo is below the window, hi above.
    let factor = if first == StepClass::Below { 2.0 } else { 0.5 };
    let (mut lo, mut hi);
    let mut doublings = 0;
    loop {
        if doublings == MAX_DOUBLINGS {
            return Err(Error::BracketNotFound { doublings });
        }
        lambda *= factor;
        doublings += 1;
        probes += 1;
        trial = probe(lambda)?;
        match classify(trial.2, params) {
            StepClass::Inside => return Ok(done(lambda, trial, probes)),
            c if c == first => {}
            _ => {
                if first == StepClass::Below {
                    hi = lambda;
                    lo = lambda / factor;
                } else {
                    lo = lambda;
                    hi = lambda / factor;
                }
                break;
            }
        }
    }

    while probes < MAX_PROBES {
        let mid = (lo * hi).sqrt();
        probes += 1;
        trial = probe(mid)?;
        match classify(trial.2, params) {
            StepClass::Inside => return Ok(done(mid, trial, probes)),
            StepClass::Below => lo = mid,
            StepClass::Above => hi = mid,
        }
    }
    Err(Error::BisectionExhausted { probes })
}
