//! Accelerated proximal frameworks and their tensor instantiations.
//!
//! Both frameworks share one driver. Each outer iteration picks `λ` by the
//! large-step search, takes an approximate proximal step at the extrapolated
//! point `ṽ`, and updates the dual sequence `v` and the accumulator (`A_k`
//! or `γ_k`). The four algorithms differ only in the accumulator and in the
//! proximal oracle plugged into the search.

pub mod audit;
mod provider;

use serde::{Deserialize, Serialize};

use crate::model::DEFAULT_TOL;
use crate::oracle::Problem;
use crate::stepsize::{bisect_lambda, lambda_feedback, AccumulatorState, FeedbackParams, ProximalOracle, Variant};
use crate::{Error, Point, Result};

pub use provider::{rounding_floor, ExactProx, TaylorProvider};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    /// Generic framework accumulating `A_k`, exact proximal steps.
    Caf1,
    /// Generic framework accumulating `γ_k`, exact proximal steps.
    Caf2,
    /// `A_k` framework with Taylor-model steps.
    Tensor1,
    /// `γ_k` framework with Taylor-model steps.
    Tensor2,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [Algorithm::Caf1, Algorithm::Caf2, Algorithm::Tensor1, Algorithm::Tensor2];

    pub fn variant(self) -> Variant {
        match self {
            Algorithm::Caf1 | Algorithm::Tensor1 => Variant::CafI,
            Algorithm::Caf2 | Algorithm::Tensor2 => Variant::CafII,
        }
    }

    pub fn is_tensor(self) -> bool {
        matches!(self, Algorithm::Tensor1 | Algorithm::Tensor2)
    }

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Caf1 => "caf1",
            Algorithm::Caf2 => "caf2",
            Algorithm::Tensor1 => "tensor1",
            Algorithm::Tensor2 => "tensor2",
        }
    }
}

impl std::str::FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown algorithm `{s}`")))
    }
}

/// Which tensor subproblem the Taylor provider solves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubproblemKind {
    /// σ̂-inexact solution of the proximal model.
    #[default]
    Inexact,
    /// Minimizer of the plain model.
    Exact,
}

/// Scalar parameters of a discrete run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub p: usize,
    /// Lipschitz constant of `∇^{(p)}Φ`; the problem's documented value
    /// when absent.
    pub ell: Option<f64>,
    pub subproblem: SubproblemKind,
    pub sigma_hat: f64,
    pub sigma_l: f64,
    pub sigma_u: f64,
    /// θ for the generic frameworks.
    pub theta: f64,
    /// HPE constant for the generic frameworks and for the exact tensor
    /// branch; the inexact branch uses `σ̂ + σ_u`.
    pub sigma: f64,
    /// Generic frameworks accept `m ∈ [θ, theta_high_factor·θ]`.
    pub theta_high_factor: f64,
    pub tol_grad: f64,
    pub inner_tol: f64,
    pub max_iter: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            p: 1,
            ell: None,
            subproblem: SubproblemKind::Inexact,
            sigma_hat: 0.2,
            sigma_l: 0.3,
            sigma_u: 0.7,
            theta: 0.5,
            sigma: 0.5,
            theta_high_factor: 2.0,
            tol_grad: 1e-10,
            inner_tol: DEFAULT_TOL,
            max_iter: 200,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self, algorithm: Algorithm) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if !(1..=3).contains(&self.p) {
            return Err(Error::UnsupportedOrder { requested: self.p, max: 3 });
        }
        if let Some(l) = self.ell {
            if !(l > 0.0) {
                return bad(format!("ell must be positive, got {l}"));
            }
        }
        if !(self.tol_grad >= 0.0 && self.inner_tol > 0.0) {
            return bad("tolerances must be nonnegative (inner_tol positive)".into());
        }
        if algorithm.is_tensor() && self.subproblem == SubproblemKind::Inexact {
            let (sh, sl, su) = (self.sigma_hat, self.sigma_l, self.sigma_u);
            if !(sh > 0.0 && sh < 1.0) {
                return bad(format!("sigma_hat must lie in (0,1), got {sh}"));
            }
            if !(0.0 < sl && sl < su && su < 1.0) {
                return bad(format!("need 0 < sigma_l < sigma_u < 1, got {sl}, {su}"));
            }
            let e = self.p as i32 - 1;
            if !(sl * (1.0 + sh).powi(e) < su * (1.0 - sh).powi(e)) {
                return bad("need sigma_l (1+sigma_hat)^(p-1) < sigma_u (1-sigma_hat)^(p-1)".into());
            }
            if !(sh + su < 1.0) {
                return bad(format!("need sigma_hat + sigma_u < 1, got {}", sh + su));
            }
        } else {
            if !(self.sigma > 0.0 && self.sigma < 1.0) {
                return bad(format!("sigma must lie in (0,1), got {}", self.sigma));
            }
            if !algorithm.is_tensor() && !(self.theta > 0.0 && self.theta_high_factor >= 1.0) {
                return bad("need theta > 0 and theta_high_factor >= 1".into());
            }
        }
        Ok(())
    }

    /// HPE constant σ the run must satisfy.
    pub fn hpe_sigma(&self, algorithm: Algorithm) -> f64 {
        if algorithm.is_tensor() && self.subproblem == SubproblemKind::Inexact {
            self.sigma_hat + self.sigma_u
        } else {
            self.sigma
        }
    }

    pub fn resolve_ell(&self, problem: &Problem) -> Result<f64> {
        match self.ell {
            Some(l) => Ok(l),
            None => problem.lipschitz(self.p),
        }
    }

    pub fn feedback(&self, algorithm: Algorithm, ell: f64) -> Result<FeedbackParams> {
        match (algorithm.is_tensor(), self.subproblem) {
            (false, _) => FeedbackParams::new(self.p, self.theta, self.theta, self.theta * self.theta_high_factor),
            (true, SubproblemKind::Inexact) => FeedbackParams::inexact(self.p, ell, self.sigma_l, self.sigma_u),
            (true, SubproblemKind::Exact) => FeedbackParams::exact(self.p, ell),
        }
    }
}

/// One outer iteration. Record 0 holds the initial point with `λ = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterateRecord {
    pub k: usize,
    pub lambda: f64,
    /// `A_k` or `γ_k`.
    pub accumulator: f64,
    pub f_gap: f64,
    pub grad_norm_sq: f64,
    pub hpe_lhs: f64,
    pub hpe_rhs: f64,
    pub large_step_value: f64,
    pub lyapunov: f64,
    pub probe_count: usize,
    pub eps: f64,
    pub x: Vec<f64>,
    pub v: Vec<f64>,
    /// `ṽ_{k-1}`, the point the step was taken from.
    pub tilde_v: Vec<f64>,
    pub w: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    GradientTol,
    MaxIter,
    StationaryDetected,
    /// The next step cannot be certified in double precision.
    PrecisionFloor,
}

/// Everything the auditor needs besides the trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub algorithm: Algorithm,
    pub variant: Variant,
    pub p: usize,
    pub ell: f64,
    pub feedback: FeedbackParams,
    pub sigma: f64,
    pub subproblem: SubproblemKind,
    pub inner_tol: f64,
    pub tol_grad: f64,
    /// `‖v_0 - x*‖²`.
    pub dist0_sq: Option<f64>,
    pub energy0: Option<f64>,
    pub theta_outside_unit_interval: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub records: Vec<IterateRecord>,
    pub termination: Termination,
    pub meta: RunMeta,
    pub config: SolverConfig,
}

impl RunResult {
    pub fn last(&self) -> &IterateRecord {
        self.records.last().expect("record 0 always present")
    }

    pub fn iterations(&self) -> usize {
        self.records.len() - 1
    }

    pub fn total_probes(&self) -> usize {
        self.records.iter().map(|r| r.probe_count).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HpeCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
}

/// `‖λw + x - ṽ‖² + 2λε ≤ σ²‖x - ṽ‖²`, with 1e-14 absolute slack.
pub fn hpe_check(lambda: f64, w: &Point, x: &Point, tilde_v: &Point, eps: f64, sigma: f64) -> HpeCheck {
    let d = x - tilde_v;
    let lhs = (w * lambda + &d).norm_squared() + 2.0 * lambda * eps;
    let rhs = sigma * sigma * d.norm_squared();
    HpeCheck { lhs, rhs, pass: lhs <= rhs + 1e-14 }
}

/// Discrete energy `w·gap + ½‖v - x*‖²` with `w = A_k` or `1/γ_k`.
pub fn lyapunov_discrete(gap: f64, accumulator: &AccumulatorState, v: &Point, x_star: Option<&Point>) -> Result<f64> {
    let xs = x_star.ok_or(Error::UnknownMinimizer)?;
    Ok(accumulator.energy_weight() * gap + 0.5 * (v - xs).norm_squared())
}

fn gap_or_nan(problem: &Problem, x: &Point) -> f64 {
    problem.gap(x).unwrap_or(f64::NAN)
}

fn energy_or_nan(problem: &Problem, gap: f64, acc: &AccumulatorState, v: &Point) -> f64 {
    lyapunov_discrete(gap, acc, v, problem.known_minimizer()).unwrap_or(f64::NAN)
}

/// Outer-loop state of a run in progress.
pub struct Driver<'a> {
    algorithm: Algorithm,
    problem: &'a Problem,
    config: SolverConfig,
    meta: RunMeta,
    oracle: Box<dyn ProximalOracle + 'a>,
    k: usize,
    x: Point,
    v: Point,
    grad: Point,
    acc: AccumulatorState,
    last_lambda: Option<f64>,
    initial_grad_norm: f64,
}

impl<'a> Driver<'a> {
    /// Starts at `x_0 = v_0 = problem.start()`.
    pub fn new(algorithm: Algorithm, problem: &'a Problem, config: &SolverConfig) -> Result<Self> {
        Self::with_start(algorithm, problem, config, problem.start().clone())
    }

    pub fn with_start(algorithm: Algorithm, problem: &'a Problem, config: &SolverConfig, x0: Point) -> Result<Self> {
        config.validate(algorithm)?;
        if x0.len() != problem.dim() {
            return Err(Error::DimensionMismatch { expected: problem.dim(), found: x0.len() });
        }
        let ell = config.resolve_ell(problem)?;
        let feedback = config.feedback(algorithm, ell)?;
        let sigma = config.hpe_sigma(algorithm);
        let oracle: Box<dyn ProximalOracle + 'a> = if algorithm.is_tensor() {
            Box::new(TaylorProvider::new(problem, config.p, ell, config.subproblem, config.sigma_hat, config.inner_tol))
        } else {
            Box::new(ExactProx::new(problem, config.inner_tol))
        };
        let acc = AccumulatorState::initial(algorithm.variant());
        let v = x0.clone();
        let grad = problem.gradient(&x0);
        let dist0_sq = problem.known_minimizer().map(|xs| (&v - xs).norm_squared());
        let gap0 = gap_or_nan(problem, &x0);
        let energy0 = problem.known_minimizer().map(|_| energy_or_nan(problem, gap0, &acc, &v));
        let meta = RunMeta {
            algorithm,
            variant: algorithm.variant(),
            p: config.p,
            ell,
            feedback,
            sigma,
            subproblem: config.subproblem,
            inner_tol: config.inner_tol,
            tol_grad: config.tol_grad,
            dist0_sq,
            energy0,
            theta_outside_unit_interval: feedback.theta_outside_unit_interval(),
        };
        Ok(Self {
            algorithm,
            problem,
            config: config.clone(),
            meta,
            oracle,
            k: 0,
            initial_grad_norm: grad.norm(),
            x: x0,
            v,
            grad,
            acc,
            last_lambda: None,
        })
    }

    pub fn meta(&self) -> &RunMeta {
        &self.meta
    }

    pub fn accumulator(&self) -> AccumulatorState {
        self.acc
    }

    /// Record for the current point without taking a step.
    pub fn initial_record(&self) -> IterateRecord {
        let gap = gap_or_nan(self.problem, &self.x);
        IterateRecord {
            k: self.k,
            lambda: 0.0,
            accumulator: self.acc.value(),
            f_gap: gap,
            grad_norm_sq: self.grad.norm_squared(),
            hpe_lhs: 0.0,
            hpe_rhs: 0.0,
            large_step_value: 0.0,
            lyapunov: energy_or_nan(self.problem, gap, &self.acc, &self.v),
            probe_count: 0,
            eps: 0.0,
            x: self.x.as_slice().to_vec(),
            v: self.v.as_slice().to_vec(),
            tilde_v: self.x.as_slice().to_vec(),
            w: self.grad.as_slice().to_vec(),
        }
    }

    /// Why the run should stop at the current point, if it should.
    pub fn stop_reason(&self) -> Option<Termination> {
        let g = self.grad.norm();
        if g == 0.0 {
            Some(Termination::StationaryDetected)
        } else if g <= self.config.tol_grad {
            Some(Termination::GradientTol)
        } else if self.k >= self.config.max_iter {
            Some(Termination::MaxIter)
        } else {
            None
        }
    }

    /// One outer iteration of the framework.
    ///
    /// A step whose HPE test fails only by the rounding floor of its
    /// residual is rejected with [`Error::PrecisionFloor`].
    pub fn step(&mut self) -> Result<IterateRecord> {
        let fb = &self.meta.feedback;
        let start = match self.last_lambda {
            Some(l) => l,
            None => {
                let low = FeedbackParams { theta: fb.theta_low, ..*fb };
                lambda_feedback(&low, self.initial_grad_norm)?
            }
        };
        let out = bisect_lambda(&self.acc, &self.x, &self.v, self.oracle.as_ref(), fb, start)?;
        let lambda = out.lambda;
        let step = out.step;
        let tv = out.coupling.tilde_v;
        let hpe = hpe_check(lambda, &step.w, &step.x, &tv, step.eps, self.meta.sigma);
        if !hpe.pass {
            let floor = rounding_floor(self.problem, lambda, &step.x, &tv);
            if hpe.lhs.sqrt() <= hpe.rhs.sqrt() + floor {
                return Err(Error::PrecisionFloor { residual: hpe.lhs.sqrt(), floor });
            }
        }

        let (acc, mult) = self.acc.advance(lambda, out.coupling.coef);
        self.acc = acc;
        self.v -= &step.w * mult;
        self.x = step.x;
        self.grad = self.problem.gradient(&self.x);
        self.k += 1;
        self.last_lambda = Some(lambda);

        let gap = gap_or_nan(self.problem, &self.x);
        Ok(IterateRecord {
            k: self.k,
            lambda,
            accumulator: self.acc.value(),
            f_gap: gap,
            grad_norm_sq: self.grad.norm_squared(),
            hpe_lhs: hpe.lhs,
            hpe_rhs: hpe.rhs,
            large_step_value: out.large_step_value,
            lyapunov: energy_or_nan(self.problem, gap, &self.acc, &self.v),
            probe_count: out.probes,
            eps: step.eps,
            x: self.x.as_slice().to_vec(),
            v: self.v.as_slice().to_vec(),
            tilde_v: tv.as_slice().to_vec(),
            w: step.w.as_slice().to_vec(),
        })
    }

    pub fn algorithm(&self) -> Algorithm {
        self.algorithm
    }
}

/// Runs an algorithm from `problem.start()` until a stopping rule fires.
pub fn run(algorithm: Algorithm, problem: &Problem, config: &SolverConfig) -> Result<RunResult> {
    let mut d = Driver::new(algorithm, problem, config)?;
    let mut records = vec![d.initial_record()];
    let termination = loop {
        if let Some(t) = d.stop_reason() {
            break t;
        }
        match d.step() {
            Ok(r) => records.push(r),
            Err(Error::Stationary { .. }) => break Termination::StationaryDetected,
            Err(Error::PrecisionFloor { .. }) => break Termination::PrecisionFloor,
            Err(e) => return Err(e),
        }
    };
    Ok(RunResult { records, termination, meta: d.meta.clone(), config: config.clone() })
}
