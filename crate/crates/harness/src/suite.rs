//! Runs every experiment of a suite in parallel, then writes the aggregate
//! table sequentially.

use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::compare::{compare, write_csv};
use crate::config::{OutputConfig, SuiteConfig};
use crate::error::{io_err, Result};
use crate::experiment::{run_experiment, Artifacts};
use crate::summary::Kind;

pub const AGGREGATE_FILE: &str = "aggregate.csv";

pub struct SuiteOutcome {
    pub runs: Vec<Artifacts>,
    pub aggregate: PathBuf,
}

impl SuiteOutcome {
    pub fn all_audits_passed(&self) -> bool {
        self.runs.iter().all(|a| a.summary.audit_passed == Some(true))
    }
}

pub fn run_suite(config: &SuiteConfig, out: &Path) -> Result<SuiteOutcome> {
    let experiments: Vec<_> = config
        .experiments()
        .into_iter()
        .map(|mut e| {
            e.output = OutputConfig { dir: out.to_path_buf(), stem: None };
            e
        })
        .collect();
    let runs = experiments.par_iter().map(|e| run_experiment(e, Kind::Discrete)).collect::<Result<Vec<_>>>()?;

    let summaries: Vec<_> = runs.iter().map(|a| a.summary.clone()).collect();
    let rows = compare(&summaries)?;
    let mut buf = Vec::new();
    write_csv(&mut buf, &rows)?;
    let aggregate = out.join(AGGREGATE_FILE);
    std::fs::write(&aggregate, buf).map_err(io_err(&aggregate))?;
    Ok(SuiteOutcome { runs, aggregate })
}
