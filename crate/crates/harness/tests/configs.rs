use std::path::PathBuf;

use hoaccel::accel::Algorithm;
use hoaccel_harness::config::{load, ExperimentConfig, SuiteConfig};

fn shipped(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

#[test]
fn default_suite_file_is_the_builtin_default() {
    let c: SuiteConfig = load(Some(&shipped("default_suite.toml")), &[]).unwrap();
    assert_eq!(c, SuiteConfig::default());
    assert_eq!(c.experiments().len(), 24);
}

#[test]
fn example_run_and_flow_configs_parse() {
    let r: ExperimentConfig = load(Some(&shipped("run_tensor2_lse.toml")), &[]).unwrap();
    assert_eq!(r.algorithm, Algorithm::Tensor2);
    assert_eq!(r.solver.p, 2);
    r.solver.validate(r.algorithm).unwrap();
    let f: ExperimentConfig = load(Some(&shipped("flow_p2_quadratic.toml")), &[]).unwrap();
    assert_eq!(f.flow.p, 2);
    f.flow.validate().unwrap();
}

#[test]
fn flags_override_file_values() {
    let c: ExperimentConfig =
        load(Some(&shipped("run_tensor2_lse.toml")), &["solver.max_iter=7".into(), "seed=3".into()]).unwrap();
    assert_eq!((c.solver.max_iter, c.seed), (7, 3));
}
