//! Single discrete runs and flow integrations, their on-disk artifacts, and
//! re-auditing a trace read back from disk.

use std::fs;
use std::path::{Path, PathBuf};

use hoaccel::accel::audit::{audit, AuditReport};
use hoaccel::accel::{run, Driver, IterateRecord, RunResult};
use hoaccel::flow::{audit_flow, default_v0, integrate, FlowTrace};

use crate::config::{ExperimentConfig, FitConfig};
use crate::error::{io_err, Error, Result};
use crate::rates::{fit_rate, positive_prefix, running_min};
use crate::summary::{finite, FitOutcome, FlowStats, Kind, Rates, Stage, Summary};
use crate::trace::{self, TraceKind};

/// Feedback-law residual allowed along a flow trajectory.
pub const FLOW_RESIDUAL_TOL: f64 = 1e-6;

/// Default file stem: `<problem>_<algorithm>_p<p>` or `<problem>_flow_p<p>`.
pub fn stem(config: &ExperimentConfig, kind: Kind) -> String {
    if let Some(s) = &config.output.stem {
        return s.clone();
    }
    match kind {
        Kind::Discrete => format!("{}_{}_p{}", config.problem.name(), config.algorithm.name(), config.solver.p),
        Kind::Flow => format!("{}_flow_p{}", config.problem.name(), config.flow.p),
    }
}

fn fit(series: &[(f64, f64)], cfg: &FitConfig) -> FitOutcome {
    match fit_rate(positive_prefix(series), cfg.window()) {
        Ok(f) => FitOutcome { fit: Some(f), error: None },
        Err(e) => FitOutcome { fit: None, error: Some(e.to_string()) },
    }
}

fn rates(index: &[f64], gaps: &[f64], grads: &[f64], cfg: &FitConfig) -> Rates {
    let pair = |vals: &[f64]| index.iter().copied().zip(vals.iter().copied()).collect::<Vec<_>>();
    Rates { f_gap: fit(&pair(gaps), cfg), grad_norm_sq: fit(&pair(&running_min(grads)), cfg) }
}

/// Rate fits of a discrete trace, skipping the `k = 0` record.
pub fn discrete_rates(records: &[IterateRecord], cfg: &FitConfig) -> Rates {
    let rs = records.get(1..).unwrap_or(&[]);
    let k: Vec<f64> = rs.iter().map(|r| r.k as f64).collect();
    let g: Vec<f64> = rs.iter().map(|r| r.f_gap).collect();
    let n: Vec<f64> = rs.iter().map(|r| r.grad_norm_sq).collect();
    rates(&k, &g, &n, cfg)
}

/// Rate fits of a flow trace, skipping `t = 0`.
pub fn flow_rates(trace: &FlowTrace, cfg: &FitConfig) -> Rates {
    let ss = trace.samples.get(1..).unwrap_or(&[]);
    let t: Vec<f64> = ss.iter().map(|s| s.t).collect();
    let g: Vec<f64> = ss.iter().map(|s| s.f_gap).collect();
    let n: Vec<f64> = ss.iter().map(|s| s.grad_norm_sq).collect();
    rates(&t, &g, &n, cfg)
}

/// Serialized name of a unit enum variant.
fn snake_name<T: serde::Serialize>(v: &T) -> Option<String> {
    serde_json::to_value(v).ok().and_then(|v| v.as_str().map(String::from))
}

/// Runs a discrete experiment in memory.
pub fn run_discrete(config: &ExperimentConfig) -> (Summary, Option<RunResult>) {
    let mut summary = Summary::new(Kind::Discrete, stem(config, Kind::Discrete), config);
    let problem = match config.problem.build(config.seed) {
        Ok(p) => p,
        Err(e) => {
            summary.fail(Stage::BuildProblem, e);
            return (summary, None);
        }
    };
    let result = match run(config.algorithm, &problem, &config.solver) {
        Ok(r) => r,
        Err(e) => {
            summary.fail(Stage::Solve, e);
            return (summary, None);
        }
    };
    let last = result.last();
    summary.termination = snake_name(&result.termination);
    summary.iterations = Some(result.iterations());
    summary.total_probes = Some(result.total_probes());
    summary.final_f_gap = finite(last.f_gap);
    summary.final_grad_norm_sq = finite(last.grad_norm_sq);
    summary.rates = discrete_rates(&result.records, &config.fit);
    let report = audit(&result.records, &result.meta, Some(&problem));
    summary.audit_passed = Some(report.passed());
    summary.audit = Some(report);
    summary.meta = Some(result.meta.clone());
    (summary, Some(result))
}

/// Integrates the flow from the problem's start point with `ẋ(0) = 0`.
pub fn run_flow(config: &ExperimentConfig) -> (Summary, Option<FlowTrace>) {
    let mut summary = Summary::new(Kind::Flow, stem(config, Kind::Flow), config);
    let problem = match config.problem.build(config.seed) {
        Ok(p) => p,
        Err(e) => {
            summary.fail(Stage::BuildProblem, e);
            return (summary, None);
        }
    };
    let x0 = problem.start().clone();
    let v0 = match config.flow.validate().and_then(|_| default_v0(&x0, &problem, &config.flow)) {
        Ok(v) => v,
        Err(e) => {
            summary.fail(Stage::Setup, e);
            return (summary, None);
        }
    };
    let trace = match integrate(&problem, &x0, &v0, &config.flow) {
        Ok(t) => t,
        Err(e) => {
            summary.fail(Stage::Solve, e);
            return (summary, None);
        }
    };
    let last = trace.last();
    summary.termination = snake_name(&trace.stop);
    summary.final_f_gap = finite(last.f_gap);
    summary.final_grad_norm_sq = finite(last.grad_norm_sq);
    summary.rates = flow_rates(&trace, &config.fit);
    let report = audit_flow(&trace.samples, &config.flow, FLOW_RESIDUAL_TOL);
    summary.audit_passed = Some(report.passed());
    summary.audit = Some(report);
    summary.flow = Some(FlowStats {
        stop: trace.stop,
        t_final: last.t,
        samples: trace.samples.len(),
        steps_accepted: trace.steps_accepted,
        steps_rejected: trace.steps_rejected,
        max_lambda_rate: trace.max_lambda_rate,
    });
    (summary, Some(trace))
}

/// Paths of what [`run_experiment`] wrote.
#[derive(Debug, Clone)]
pub struct Artifacts {
    pub summary: Summary,
    pub csv: Option<PathBuf>,
    pub json: PathBuf,
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    fs::write(path, bytes).map_err(io_err(path))
}

/// Runs and writes `<dir>/<stem>.csv` (when the run produced a trace) and
/// `<dir>/<stem>.json`.
pub fn run_experiment(config: &ExperimentConfig, kind: Kind) -> Result<Artifacts> {
    let dir = &config.output.dir;
    let mut csv_bytes = Vec::new();
    let summary = match kind {
        Kind::Discrete => {
            let (s, r) = run_discrete(config);
            if let Some(r) = r {
                trace::write_discrete(&mut csv_bytes, &r.records)?;
            }
            s
        }
        Kind::Flow => {
            let (s, t) = run_flow(config);
            if let Some(t) = t {
                trace::write_flow(&mut csv_bytes, &t.samples)?;
            }
            s
        }
    };
    let csv = if csv_bytes.is_empty() {
        None
    } else {
        let p = dir.join(format!("{}.csv", summary.label));
        write_file(&p, &csv_bytes)?;
        Some(p)
    };
    let json = dir.join(format!("{}.json", summary.label));
    write_file(&json, summary.to_json()?.as_bytes())?;
    Ok(Artifacts { summary, csv, json })
}

/// Re-audits a trace on disk against the config it was produced with.
pub fn check_trace(csv: &Path, config: &ExperimentConfig) -> Result<AuditReport> {
    let text = fs::read_to_string(csv).map_err(io_err(csv))?;
    match trace::detect(&text)? {
        TraceKind::Discrete => {
            let records = trace::read_discrete(text.as_bytes())?;
            let problem = config.problem.build(config.seed)?;
            let start = records
                .first()
                .map(|r| hoaccel::Point::from_vec(r.x.clone()))
                .ok_or_else(|| Error::Trace("empty trace".into()))?;
            let driver = Driver::with_start(config.algorithm, &problem, &config.solver, start)?;
            Ok(audit(&records, driver.meta(), Some(&problem)))
        }
        TraceKind::Flow => {
            let samples = trace::read_flow(text.as_bytes())?;
            config.flow.validate()?;
            Ok(audit_flow(&samples, &config.flow, FLOW_RESIDUAL_TOL))
        }
    }
}
