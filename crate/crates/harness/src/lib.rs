//! Experiment harness for `hoaccel`: TOML configs, CSV traces, JSON
//! summaries, power-law rate fits, trace audits and parallel suites.

pub mod compare;
pub mod config;
pub mod error;
pub mod experiment;
pub mod rates;
pub mod suite;
pub mod summary;
pub mod trace;

pub use error::{Error, Result};
