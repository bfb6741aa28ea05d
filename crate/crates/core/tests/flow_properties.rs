//! Continuous-time runs on quadratics and the properties they must keep.

use hoaccel::flow::{a_lower_bound, audit_flow, default_v0, integrate, FlowConfig, FlowStop};
use hoaccel::oracle::{ProblemSpec, QuadraticParams};
use hoaccel::Point;
use proptest::prelude::*;

fn quadratic(dim: usize, condition: f64, seed: u64) -> hoaccel::oracle::Problem {
    ProblemSpec::Quadratic(QuadraticParams { dim, condition, ..Default::default() }).build(seed).unwrap()
}

#[test]
fn p1_energy_and_closed_form_a() {
    for dim in [1, 2] {
        let pr = quadratic(dim, 10.0, 3);
        let c = FlowConfig { p: 1, theta: 0.25, t_end: 20.0, ..FlowConfig::default() };
        let x0 = pr.start().clone();
        let tr = integrate(&pr, &x0, &default_v0(&x0, &pr, &c).unwrap(), &c).unwrap();
        assert_eq!(tr.stop, FlowStop::Completed);
        let rep = audit_flow(&tr.samples, &c, 1e-12);
        assert!(rep.passed(), "{:?}", rep.failed());
        for s in &tr.samples {
            let closed = 0.25 * (c.theta.sqrt() * s.t + c.c).powi(2);
            assert!((s.a - closed).abs() <= 1e-8 * closed);
            assert_eq!(s.algebraic_residual, 0.0);
        }
    }
}

#[test]
fn p2_bound_and_energy() {
    let pr = quadratic(2, 10.0, 4);
    let c = FlowConfig { p: 2, t_end: 10.0, ..FlowConfig::default() };
    let x0 = pr.start().clone();
    let tr = integrate(&pr, &x0, &default_v0(&x0, &pr, &c).unwrap(), &c).unwrap();
    let e0 = tr.samples[0].lyapunov;
    assert!(tr.samples.iter().all(|s| s.a >= a_lower_bound(s.t, &c, e0) * (1.0 - 1e-8)));
    assert!(audit_flow(&tr.samples, &c, 1e-6).passed());
    assert!(tr.last().lyapunov <= e0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn energy_decreases_for_any_parameters(
        p in 1usize..=3,
        theta in 0.05f64..0.95,
        c in 0.2f64..3.0,
        x0 in proptest::collection::vec(-2.0f64..2.0, 2),
        seed in 0u64..100,
    ) {
        let pr = quadratic(2, 20.0, seed);
        let x0 = Point::from_vec(x0);
        prop_assume!(pr.gradient(&x0).norm() > 1e-3);
        let cfg = FlowConfig { p, theta, c, t_end: 3.0, ..FlowConfig::default() };
        let tr = integrate(&pr, &x0, &default_v0(&x0, &pr, &cfg).unwrap(), &cfg).unwrap();
        let rep = audit_flow(&tr.samples, &cfg, 1e-6);
        prop_assert!(rep.passed(), "{:?}", rep.failed());
    }
}
