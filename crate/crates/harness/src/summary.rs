//! Machine-readable run summaries. No timestamps or timings are recorded, so
//! a summary is a pure function of its config.

use std::path::Path;

use hoaccel::accel::audit::AuditReport;
use hoaccel::accel::{Algorithm, RunMeta};
use hoaccel::flow::FlowStop;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::{io_err, Error, Result};
use crate::rates::RateFit;

/// JSON schema every summary validates against.
pub const SCHEMA: &str = include_str!("../schema/summary.schema.json");

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Discrete,
    Flow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    Failed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    BuildProblem,
    Setup,
    Solve,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub stage: Stage,
    pub message: String,
}

/// A fit, or the reason there is none.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FitOutcome {
    pub fit: Option<RateFit>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Rates {
    pub f_gap: FitOutcome,
    /// Fit of the running minimum of `‖∇Φ‖²`.
    pub grad_norm_sq: FitOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowStats {
    pub stop: FlowStop,
    pub t_final: f64,
    pub samples: usize,
    pub steps_accepted: usize,
    pub steps_rejected: usize,
    pub max_lambda_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Versions {
    pub hoaccel: String,
    pub harness: String,
}

impl Default for Versions {
    fn default() -> Self {
        Self { hoaccel: hoaccel::VERSION.to_string(), harness: env!("CARGO_PKG_VERSION").to_string() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub schema_version: u32,
    pub kind: Kind,
    pub label: String,
    pub problem: String,
    /// Absent for flow runs.
    pub algorithm: Option<Algorithm>,
    pub p: usize,
    pub seed: u64,
    pub status: Status,
    pub failure: Option<Failure>,
    /// Discrete termination reason, or how the flow stopped.
    pub termination: Option<String>,
    pub iterations: Option<usize>,
    pub total_probes: Option<usize>,
    pub final_f_gap: Option<f64>,
    pub final_grad_norm_sq: Option<f64>,
    pub rates: Rates,
    pub audit_passed: Option<bool>,
    pub audit: Option<AuditReport>,
    pub meta: Option<RunMeta>,
    pub flow: Option<FlowStats>,
    pub config: ExperimentConfig,
    pub versions: Versions,
}

impl Summary {
    pub fn new(kind: Kind, label: String, config: &ExperimentConfig) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            kind,
            label,
            problem: config.problem.name().to_string(),
            algorithm: (kind == Kind::Discrete).then_some(config.algorithm),
            p: match kind {
                Kind::Discrete => config.solver.p,
                Kind::Flow => config.flow.p,
            },
            seed: config.seed,
            status: Status::Ok,
            failure: None,
            termination: None,
            iterations: None,
            total_probes: None,
            final_f_gap: None,
            final_grad_norm_sq: None,
            rates: Rates::default(),
            audit_passed: None,
            audit: None,
            meta: None,
            flow: None,
            config: config.clone(),
            versions: Versions::default(),
        }
    }

    pub fn fail(&mut self, stage: Stage, err: impl std::fmt::Display) {
        self.status = Status::Failed;
        self.failure = Some(Failure { stage, message: err.to_string() });
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }
}

/// `Some(v)` for finite `v`; JSON has no NaN or infinity.
pub(crate) fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

fn schema_validator() -> jsonschema::Validator {
    let schema: serde_json::Value = serde_json::from_str(SCHEMA).expect("bundled schema is valid JSON");
    jsonschema::validator_for(&schema).expect("bundled schema compiles")
}

/// Validates a JSON document against [`SCHEMA`].
pub fn validate(doc: &serde_json::Value) -> std::result::Result<(), String> {
    let v = schema_validator();
    let errors: Vec<String> = v.iter_errors(doc).map(|e| format!("{} at {}", e, e.instance_path())).collect();
    if errors.is_empty() {
        Ok(())
    } else {
        Err(errors.join("; "))
    }
}

/// Reads a summary, checking it against the schema first.
pub fn load(path: &Path) -> Result<Summary> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    let doc: serde_json::Value = serde_json::from_str(&text)?;
    validate(&doc).map_err(|message| Error::Schema { path: path.to_path_buf(), message })?;
    Ok(serde_json::from_value(doc)?)
}
