//! Experiment and suite configuration, read from TOML with dotted
//! `key=value` overrides applied on top.

use std::path::{Path, PathBuf};

use hoaccel::accel::{Algorithm, SolverConfig};
use hoaccel::flow::FlowConfig;
use hoaccel::oracle::{LogSumExpParams, LogisticParams, ProblemSpec, QuadraticParams};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{io_err, Error, Result};
use crate::rates::FitWindow;

/// One discrete run or one flow integration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub algorithm: Algorithm,
    pub problem: ProblemSpec,
    pub solver: SolverConfig,
    pub flow: FlowConfig,
    pub fit: FitConfig,
    pub output: OutputConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            algorithm: Algorithm::Tensor1,
            problem: ProblemSpec::Quadratic(QuadraticParams::default()),
            solver: SolverConfig::default(),
            flow: FlowConfig::default(),
            fit: FitConfig::default(),
            output: OutputConfig::default(),
        }
    }
}

/// Which part of a series the summary's rate fits use.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    /// Leading fraction of the series treated as transient.
    pub drop_fraction: f64,
    /// Explicit `[from, to]` index window; overrides `drop_fraction`.
    pub window: Option<[f64; 2]>,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self { drop_fraction: 0.2, window: None }
    }
}

impl FitConfig {
    pub fn window(&self) -> FitWindow {
        match self.window {
            Some([a, b]) => FitWindow::Range(a, b),
            None => FitWindow::DropFraction(self.drop_fraction),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    /// File stem; derived from problem, method and order when absent.
    pub stem: Option<String>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: PathBuf::from("results"), stem: None }
    }
}

/// A matrix of discrete runs: every problem × order × algorithm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuiteConfig {
    pub seed: u64,
    pub orders: Vec<usize>,
    pub algorithms: Vec<Algorithm>,
    pub problems: Vec<ProblemSpec>,
    pub solver: SolverConfig,
    pub fit: FitConfig,
    pub output: OutputConfig,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            orders: vec![1, 2],
            algorithms: Algorithm::ALL.to_vec(),
            problems: vec![
                ProblemSpec::Quadratic(QuadraticParams::default()),
                ProblemSpec::LogSumExp(LogSumExpParams::default()),
                ProblemSpec::Logistic(LogisticParams::default()),
            ],
            solver: SolverConfig::default(),
            fit: FitConfig::default(),
            output: OutputConfig { dir: PathBuf::from("suite"), stem: None },
        }
    }
}

impl SuiteConfig {
    /// Expanded runs, in the fixed order problems → orders → algorithms.
    pub fn experiments(&self) -> Vec<ExperimentConfig> {
        let mut out = Vec::new();
        for problem in &self.problems {
            for &p in &self.orders {
                for &algorithm in &self.algorithms {
                    out.push(ExperimentConfig {
                        seed: self.seed,
                        algorithm,
                        problem: problem.clone(),
                        solver: SolverConfig { p, ..self.solver.clone() },
                        flow: FlowConfig::default(),
                        fit: self.fit.clone(),
                        output: OutputConfig { dir: self.output.dir.clone(), stem: None },
                    });
                }
            }
        }
        out
    }
}

/// Reads `path` (or starts from defaults) and applies `overrides`, each of
/// the form `dotted.key=value` with `value` in TOML syntax; bare words are
/// taken as strings. A `problem` table without a `name` is the default
/// quadratic.
pub fn load<T: DeserializeOwned>(path: Option<&Path>, overrides: &[String]) -> Result<T> {
    let mut table = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(io_err(p))?;
            text.parse::<toml::Table>().map_err(|e| Error::Config(format!("{}: {e}", p.display())))?
        }
        None => toml::Table::new(),
    };
    for o in overrides {
        apply_override(&mut table, o)?;
    }
    if let Some(toml::Value::Table(p)) = table.get_mut("problem") {
        p.entry("name").or_insert_with(|| "quadratic".into());
    }
    toml::Value::Table(table).try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))
}

pub fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<()> {
    let (key, raw) =
        assignment.split_once('=').ok_or_else(|| Error::Config(format!("override `{assignment}` is not key=value")))?;
    let value = parse_value(raw.trim());
    let parts: Vec<&str> = key.trim().split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::Config(format!("bad override key `{key}`")));
    }
    let mut cur = table;
    for part in &parts[..parts.len() - 1] {
        let entry = cur.entry(part.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur =
            entry.as_table_mut().ok_or_else(|| Error::Config(format!("override `{key}`: `{part}` is not a table")))?;
    }
    cur.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

fn parse_value(raw: &str) -> toml::Value {
    format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}
