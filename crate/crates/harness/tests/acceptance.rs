//! Acceptance suite. Prints one `[PASS]`/`[FAIL]` line per criterion and
//! exits nonzero if any criterion fails. Command-line arguments are ignored.

use std::fs;
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use hoaccel::accel::audit::check_framework;
use hoaccel::accel::{run, Algorithm, Driver, IterateRecord, SolverConfig, TaylorProvider};
use hoaccel::flow::{default_v0, integrate, FlowConfig, FlowSample};
use hoaccel::model::{solve_regularized, solve_unregularized, TaylorModel};
use hoaccel::oracle::{LogSumExpParams, LogisticParams, Problem, ProblemSpec, Quadratic, QuadraticParams};
use hoaccel::stepsize::{bisect_lambda, large_step_check, AccumulatorState, ProximalOracle, StepClass, Variant};
use hoaccel::{Matrix, Point};
use hoaccel_harness::config::SuiteConfig;
use hoaccel_harness::rates::{fit_rate, positive_prefix, running_min, FitWindow};
use hoaccel_harness::suite::run_suite;

type Verdict = Result<String, String>;

fn quadratic() -> ProblemSpec {
    ProblemSpec::Quadratic(QuadraticParams::default())
}

fn lse() -> ProblemSpec {
    ProblemSpec::LogSumExp(LogSumExpParams::default())
}

const SEED: u64 = 0;

struct Discrete {
    label: String,
    records: Vec<IterateRecord>,
    elapsed: Duration,
}

fn discrete_runs(p: usize) -> Result<Vec<Discrete>, String> {
    let mut out = Vec::new();
    for spec in [quadratic(), lse()] {
        let problem = spec.build(SEED).map_err(|e| e.to_string())?;
        for alg in [Algorithm::Tensor1, Algorithm::Tensor2] {
            let cfg = SolverConfig { p, max_iter: 200, ..SolverConfig::default() };
            let t0 = Instant::now();
            let r = run(alg, &problem, &cfg).map_err(|e| format!("{} {}: {e}", spec.name(), alg.name()))?;
            out.push(Discrete {
                label: format!("{}/{}", spec.name(), alg.name()),
                records: r.records,
                elapsed: t0.elapsed(),
            });
        }
    }
    Ok(out)
}

fn series(records: &[IterateRecord], f: impl Fn(&IterateRecord) -> f64) -> Vec<(f64, f64)> {
    records.iter().filter(|r| r.k >= 1).map(|r| (r.k as f64, f(r))).collect()
}

fn slope(s: &[(f64, f64)], window: FitWindow) -> Result<f64, String> {
    fit_rate(positive_prefix(s), window).map(|f| f.slope).map_err(|e| e.to_string())
}

fn all_ok(parts: Vec<Result<String, String>>) -> Verdict {
    let failed: Vec<String> = parts.iter().filter_map(|p| p.as_ref().err().cloned()).collect();
    if failed.is_empty() {
        Ok(parts.into_iter().map(|p| p.unwrap()).collect::<Vec<_>>().join("; "))
    } else {
        Err(failed.join("; "))
    }
}

/// Gap rate, with the early-exit clause `gap ≤ 1e-12` before `k_exit`.
fn gap_rate(runs: &[Discrete], target: f64, window: FitWindow, k_exit: usize, budget: Duration) -> Verdict {
    all_ok(
        runs.iter()
            .map(|d| {
                if d.elapsed > budget {
                    return Err(format!("{} took {:.2?}", d.label, d.elapsed));
                }
                let early = d.records.iter().find(|r| r.k <= k_exit && r.f_gap <= 1e-12);
                let fitted = slope(&series(&d.records, |r| r.f_gap), window);
                match (fitted, early) {
                    (Ok(s), _) if s <= target => Ok(format!("{} slope {s:.2}", d.label)),
                    (_, Some(r)) => Ok(format!("{} gap {:.1e} at k={}", d.label, r.f_gap, r.k)),
                    (Ok(s), None) => Err(format!("{} slope {s:.3} > {target}", d.label)),
                    (Err(e), None) => Err(format!("{}: {e}", d.label)),
                }
            })
            .collect(),
    )
}

fn grad_rate(runs: &[Discrete], target: f64, window: FitWindow) -> Verdict {
    all_ok(
        runs.iter()
            .map(|d| {
                let raw = series(&d.records, |r| r.grad_norm_sq);
                let vals: Vec<f64> = raw.iter().map(|p| p.1).collect();
                let inf: Vec<(f64, f64)> = raw.iter().map(|p| p.0).zip(running_min(&vals)).collect();
                match slope(&inf, window) {
                    Ok(s) if s <= target => Ok(format!("{} slope {s:.2}", d.label)),
                    Ok(s) => Err(format!("{} slope {s:.3} > {target}", d.label)),
                    Err(e) => Err(format!("{}: {e}", d.label)),
                }
            })
            .collect(),
    )
}

fn criterion_4(dir: &Path) -> Verdict {
    let cfg = SuiteConfig::default();
    run_suite(&cfg, dir).map_err(|e| e.to_string())?;
    let mut csvs: Vec<_> = fs::read_dir(dir)
        .map_err(|e| e.to_string())?
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "csv") && p.file_name().unwrap() != "aggregate.csv")
        .collect();
    csvs.sort();
    if csvs.len() != 24 {
        return Err(format!("expected 24 traces, found {}", csvs.len()));
    }
    let mut bad = Vec::new();
    for c in &csvs {
        let out =
            Command::new(env!("CARGO_BIN_EXE_hoaccel")).arg("check").arg(c).output().map_err(|e| e.to_string())?;
        if !out.status.success() {
            bad.push(format!("{} (exit {:?})", c.file_name().unwrap().to_string_lossy(), out.status.code()));
        }
    }
    if bad.is_empty() {
        Ok(format!("`hoaccel check` clean on all {} traces", csvs.len()))
    } else {
        Err(bad.join(", "))
    }
}

fn flow_problems() -> Vec<(&'static str, Problem)> {
    let q1 = Quadratic::problem(Matrix::from_element(1, 1, 1.0), Point::from_vec(vec![0.5]));
    let q2 = Quadratic::problem(Matrix::from_row_slice(2, 2, &[1.0, 0.3, 0.3, 0.2]), Point::from_vec(vec![0.0, -1.0]));
    vec![("1-D", q1), ("2-D", q2)]
}

fn energy_nonincreasing(s: &[FlowSample]) -> Result<(), String> {
    let slack = 1e-9 * (1.0 + s[0].lyapunov);
    for w in s.windows(2) {
        if !(w[1].lyapunov <= w[0].lyapunov + slack) {
            return Err(format!("E rises at t={}: {} -> {}", w[1].t, w[0].lyapunov, w[1].lyapunov));
        }
    }
    Ok(())
}

fn flow_run(problem: &Problem, p: usize) -> Result<(Vec<FlowSample>, Duration, FlowConfig), String> {
    let cfg = FlowConfig { p, t_end: 50.0, abs_tol: 1e-9, rel_tol: 1e-9, ..FlowConfig::default() };
    let x0 = problem.start().clone();
    let v0 = default_v0(&x0, problem, &cfg).map_err(|e| e.to_string())?;
    let t0 = Instant::now();
    let tr = integrate(problem, &x0, &v0, &cfg).map_err(|e| e.to_string())?;
    Ok((tr.samples, t0.elapsed(), cfg))
}

fn flow_gap_slope(s: &[FlowSample]) -> Result<f64, String> {
    let ser: Vec<(f64, f64)> = s.iter().map(|s| (s.t, s.f_gap)).collect();
    slope(&ser, FitWindow::Range(5.0, 50.0))
}

fn criterion_5() -> Verdict {
    all_ok(
        flow_problems()
            .iter()
            .map(|(name, problem)| {
                let (s, _, cfg) = flow_run(problem, 1)?;
                energy_nonincreasing(&s).map_err(|e| format!("{name}: {e}"))?;
                let res = s.iter().map(|x| x.algebraic_residual).fold(0.0, f64::max);
                if res > 1e-12 {
                    return Err(format!("{name}: residual {res:e}"));
                }
                let mut a_err = 0.0f64;
                for x in &s {
                    let closed = 0.25 * (cfg.theta.sqrt() * x.t + cfg.c).powi(2);
                    a_err = a_err.max((x.a - closed).abs() / closed);
                }
                if a_err > 1e-8 {
                    return Err(format!("{name}: a off closed form by {a_err:e}"));
                }
                let sl = flow_gap_slope(&s).map_err(|e| format!("{name}: {e}"))?;
                if sl > -1.8 {
                    return Err(format!("{name}: slope {sl:.3}"));
                }
                Ok(format!("{name} slope {sl:.2}, residual {res:.0e}, a err {a_err:.0e}"))
            })
            .collect(),
    )
}

/// `√a(t) ≥ c/2 + (θ^{2/q} / ((p+1) E₀^{(p-1)/q}))^{q/4} t^{q/4}`, `q = 3p+1`.
fn a_bound(t: f64, p: usize, theta: f64, c: f64, e0: f64) -> f64 {
    let p = p as f64;
    let q = 3.0 * p + 1.0;
    let base = theta.powf(2.0 / q) / ((p + 1.0) * e0.powf((p - 1.0) / q));
    (c / 2.0 + (base * t).powf(q / 4.0)).powi(2)
}

fn criterion_6() -> Verdict {
    all_ok(
        flow_problems()
            .iter()
            .map(|(name, problem)| {
                let (s, elapsed, cfg) = flow_run(problem, 2)?;
                if elapsed > Duration::from_secs(60) {
                    return Err(format!("{name}: {elapsed:.2?}"));
                }
                energy_nonincreasing(&s).map_err(|e| format!("{name}: {e}"))?;
                let res = s.iter().map(|x| x.algebraic_residual).fold(0.0, f64::max);
                if res > 1e-6 {
                    return Err(format!("{name}: residual {res:e}"));
                }
                let xs = problem.known_minimizer().unwrap();
                let x0 = Point::from_vec(s[0].x.clone());
                let v0 = Point::from_vec(s[0].v.clone());
                let e0 = 0.25 * cfg.c * cfg.c * problem.gap(&x0).unwrap() + 0.5 * (&v0 - xs).norm_squared();
                for x in &s {
                    let b = a_bound(x.t, 2, cfg.theta, cfg.c, e0);
                    if x.a < b * (1.0 - 1e-8) {
                        return Err(format!("{name}: a({}) = {} below bound {b}", x.t, x.a));
                    }
                }
                let sl = flow_gap_slope(&s).map_err(|e| format!("{name}: {e}"))?;
                if sl > -3.0 {
                    return Err(format!("{name}: slope {sl:.3}"));
                }
                let t_last = s.last().unwrap().t;
                Ok(format!("{name} slope {sl:.2} (to t={t_last:.1}), residual {res:.0e}, {elapsed:.2?}"))
            })
            .collect(),
    )
}

/// Root of an increasing scalar function on `[lo, hi]` by bisection.
fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    assert!(f(lo) < 0.0 && f(hi) > 0.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Step `d` with `(H + (ℓ‖d‖/2 + μ) I) d = -g`, by bisection on `‖d‖`.
fn cubic_step(g: &Point, h: &Matrix, ell: f64, mu: f64) -> Point {
    let n = g.len();
    let d_of = |r: f64| -> Point {
        let m = h + Matrix::identity(n, n) * (0.5 * ell * r + mu);
        -m.lu().solve(g).unwrap()
    };
    let r = bisect(|r| r - d_of(r).norm(), 0.0, 1e3);
    d_of(r)
}

fn criterion_7() -> Verdict {
    let mut parts = Vec::new();
    let tol = 1e-13;

    // Φ = ½x², centre 1, p = 2, ℓ = 1: model 0.5 + d + ½d² + |d|³/6.
    let prob = Quadratic::problem(Matrix::from_element(1, 1, 1.0), Point::zeros(1));
    let m = TaylorModel::new(&prob, &Point::from_vec(vec![1.0]), 2, 1.0).map_err(|e| e.to_string())?;
    let dm = |d: f64| 1.0 + d + 0.5 * d * d.abs();
    let u_exact = 2.0 - 3f64.sqrt();
    let u_bis = 1.0 + bisect(dm, -10.0, 0.0);
    // Coarse grid sanity check on the bisection oracle.
    let mv = |d: f64| 0.5 + d + 0.5 * d * d + d.abs().powi(3) / 6.0;
    let grid_min = (0..=40_000).map(|i| -2.0 + i as f64 * 1e-4).min_by(|a, b| mv(*a).total_cmp(&mv(*b))).unwrap();
    let u = solve_unregularized(&m, tol).map_err(|e| e.to_string())?.u[0];
    let e1 = (u - u_exact).abs().max((u - u_bis).abs());
    parts.push(if e1 <= 1e-8 && (1.0 + grid_min - u_bis).abs() <= 1e-4 {
        Ok(format!("1-D unregularized u={u:.12} (2-√3 err {:.0e})", (u - u_exact).abs()))
    } else {
        Err(format!("1-D unregularized u={u}, expected {u_exact}"))
    });
    for lambda in [0.1, 1.0, 10.0] {
        let want = 1.0 + bisect(|d| dm(d) + d / lambda, -10.0, 0.0);
        let got = solve_regularized(&m, lambda, 0.5, tol).map_err(|e| e.to_string())?.u[0];
        parts.push(if (got - want).abs() <= 1e-8 {
            Ok(format!("1-D λ={lambda}"))
        } else {
            Err(format!("1-D λ={lambda}: {got} vs {want}"))
        });
    }

    // 2-D log-sum-exp, cubic-regularized second-order model.
    let prob = ProblemSpec::LogSumExp(LogSumExpParams { dim: 2, pairs: 3, ..Default::default() })
        .build(3)
        .map_err(|e| e.to_string())?;
    let v = prob.start().clone();
    let g = prob.gradient(&v);
    let h = prob.objective().hessian(&v);
    for ell in [1.0, 10.0] {
        let m = TaylorModel::new(&prob, &v, 2, ell).map_err(|e| e.to_string())?;
        let model = |d: &Point| g.dot(d) + 0.5 * d.dot(&(&h * d)) + ell * d.norm().powi(3) / 6.0;
        let want = cubic_step(&g, &h, ell, 0.0);
        // The secular root must also beat every point of a local grid.
        let best = model(&want);
        let beaten = (-50..=50)
            .flat_map(|i| (-50..=50).map(move |j| (i, j)))
            .any(|(i, j)| model(&(&want + Point::from_vec(vec![i as f64 * 1e-3, j as f64 * 1e-3]))) < best - 1e-15);
        let got = solve_unregularized(&m, tol).map_err(|e| e.to_string())?.u - &v;
        let err = (&got - &want).norm();
        parts.push(if err <= 1e-8 && !beaten {
            Ok(format!("2-D ℓ={ell} err {err:.0e}"))
        } else {
            Err(format!("2-D ℓ={ell} unregularized err {err:e}, grid beat oracle: {beaten}"))
        });
        for lambda in [0.5, 5.0] {
            let want = cubic_step(&g, &h, ell, 1.0 / lambda);
            let got = solve_regularized(&m, lambda, 0.5, tol).map_err(|e| e.to_string())?.u - &v;
            let err = (&got - &want).norm();
            parts.push(if err <= 1e-8 {
                Ok(String::new())
            } else {
                Err(format!("2-D ℓ={ell} λ={lambda} err {err:e}"))
            });
        }
    }
    all_ok(parts).map(|s| s.split("; ").filter(|x| !x.is_empty()).collect::<Vec<_>>().join("; "))
}

const GRID: usize = 10_000;

fn scan_case(spec: ProblemSpec, alg: Algorithm, p: usize, steps: usize) -> Verdict {
    let label = format!("{} {} p={p} k={steps}", spec.name(), alg.name());
    let problem = spec.build(SEED).map_err(|e| e.to_string())?;
    let cfg = SolverConfig { p, ..SolverConfig::default() };
    let mut driver = Driver::new(alg, &problem, &cfg).map_err(|e| e.to_string())?;
    let mut rec = driver.initial_record();
    for _ in 0..steps {
        rec = driver.step().map_err(|e| e.to_string())?;
    }
    let acc = match alg.variant() {
        Variant::CafI => AccumulatorState::CafI { a_sum: rec.accumulator },
        Variant::CafII => AccumulatorState::CafII { gamma: rec.accumulator },
    };
    let (x, v) = (Point::from_vec(rec.x), Point::from_vec(rec.v));
    let ell = cfg.resolve_ell(&problem).map_err(|e| e.to_string())?;
    let fb = cfg.feedback(alg, ell).map_err(|e| e.to_string())?;
    let oracle = TaylorProvider::new(&problem, p, ell, cfg.subproblem, cfg.sigma_hat, cfg.inner_tol);
    let classify = |lambda: f64| -> Result<StepClass, String> {
        let c = acc.couple(lambda, &x, &v);
        let s = oracle.step(lambda, &c.tilde_v).map_err(|e| e.to_string())?;
        Ok(large_step_check(lambda, (&s.x - &c.tilde_v).norm(), &fb))
    };
    let got = bisect_lambda(&acc, &x, &v, &oracle, &fb, 1.0).map_err(|e| e.to_string())?.lambda;

    let (lo, hi) = (got * 1e-6, got * 1e6);
    let ratio = (hi / lo).powf(1.0 / (GRID - 1) as f64);
    let grid: Vec<f64> = (0..GRID).map(|i| lo * ratio.powi(i as i32)).collect();
    let classes = grid.iter().map(|&l| classify(l)).collect::<Result<Vec<_>, _>>()?;
    let inside: Vec<usize> = (0..GRID).filter(|&i| classes[i] == StepClass::Inside).collect();
    let (Some(&first), Some(&last)) = (inside.first(), inside.last()) else {
        return Err(format!("{label}: scan accepted nothing"));
    };
    let lo_edge = grid[first.saturating_sub(1)];
    let hi_edge = grid[(last + 1).min(GRID - 1)];
    if got >= lo_edge && got <= hi_edge {
        Ok(format!("{label}: λ={got:.4e} in scan window [{:.4e}, {:.4e}]", grid[first], grid[last]))
    } else {
        Err(format!("{label}: λ={got:e} outside [{lo_edge:e}, {hi_edge:e}]"))
    }
}

fn criterion_8() -> Verdict {
    all_ok(vec![
        scan_case(
            ProblemSpec::Quadratic(QuadraticParams { dim: 5, condition: 100.0, ..Default::default() }),
            Algorithm::Tensor1,
            2,
            0,
        ),
        scan_case(
            ProblemSpec::LogSumExp(LogSumExpParams { dim: 6, pairs: 12, ..Default::default() }),
            Algorithm::Tensor1,
            2,
            5,
        ),
        scan_case(
            ProblemSpec::Logistic(LogisticParams { dim: 4, samples: 40, ..Default::default() }),
            Algorithm::Tensor2,
            2,
            3,
        ),
    ])
}

fn criterion_9() -> Verdict {
    let specs = [quadratic(), lse(), ProblemSpec::Logistic(LogisticParams::default())];
    let mut parts = Vec::new();
    let mut steps = 0;
    for spec in &specs {
        let problem = spec.build(SEED).map_err(|e| e.to_string())?;
        for p in 1..=3 {
            for alg in [Algorithm::Tensor1, Algorithm::Tensor2] {
                let cfg = SolverConfig { p, max_iter: 100, ..SolverConfig::default() };
                let r = run(alg, &problem, &cfg).map_err(|e| e.to_string())?;
                let fact: f64 = (1..=p).map(|i| i as f64).product();
                let theta = cfg.sigma_l * fact / (2.0 * r.meta.ell);
                let rep = check_framework(&r.records, alg.variant(), p, theta, r.meta.sigma);
                steps += r.records.len() - 1;
                if !rep.passed() {
                    parts.push(Err(format!("{} {} p={p}: {:?}", spec.name(), alg.name(), rep.failed())));
                }
            }
        }
    }
    all_ok(parts).map(|_| format!("{steps} steps over 18 tensor runs valid for the generic framework"))
}

fn csv_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    v.sort();
    v
}

fn criterion_10(first: &Path, second: &Path) -> Verdict {
    let cfg = SuiteConfig::default();
    let mut times = Vec::new();
    for d in [first, second] {
        let t0 = Instant::now();
        run_suite(&cfg, d).map_err(|e| e.to_string())?;
        times.push(t0.elapsed());
    }
    let (a, b) = (csv_bytes(first), csv_bytes(second));
    if a.len() != 25 || a != b {
        let diff: Vec<_> = a.iter().zip(&b).filter(|(x, y)| x != y).map(|(x, _)| x.0.clone()).collect();
        return Err(format!("{} vs {} files; differing: {diff:?}", a.len(), b.len()));
    }
    let slow = times.iter().max().unwrap();
    if *slow > Duration::from_secs(180) {
        return Err(format!("suite took {slow:.2?}"));
    }
    Ok(format!("{} CSVs identical; suite {:.2?} / {:.2?}", a.len(), times[0], times[1]))
}

fn main() -> ExitCode {
    let tmp = tempfile::tempdir().expect("tempdir");
    let mut results: Vec<(u32, &str, Verdict)> = Vec::new();

    let p1 = discrete_runs(1);
    let p2 = discrete_runs(2);
    let with = |r: &Result<Vec<Discrete>, String>, f: &dyn Fn(&[Discrete]) -> Verdict| match r {
        Ok(runs) => f(runs),
        Err(e) => Err(e.clone()),
    };
    results.push((
        1,
        "discrete p=1 f_gap slope ≤ -1.8 over k ∈ [20, 200]",
        with(&p1, &|r| gap_rate(r, -1.8, FitWindow::Range(20.0, 200.0), 200, Duration::from_secs(5))),
    ));
    results.push((
        2,
        "discrete p=2 f_gap slope ≤ -3.0 or gap ≤ 1e-12 before k=50",
        with(&p2, &|r| gap_rate(r, -3.0, FitWindow::DropFraction(0.2), 49, Duration::from_secs(30))),
    ));
    results.push((
        3,
        "running-min grad_norm_sq slope ≤ -2.5 (p=1), ≤ -5.0 (p=2)",
        match (&p1, &p2) {
            (Ok(a), Ok(b)) => all_ok(vec![
                grad_rate(a, -2.5, FitWindow::Range(20.0, 200.0)),
                grad_rate(b, -5.0, FitWindow::DropFraction(0.2)),
            ]),
            (Err(e), _) | (_, Err(e)) => Err(e.clone()),
        },
    ));
    results.push((4, "invariant audit passes on every default-suite run", criterion_4(&tmp.path().join("audit"))));
    results.push((5, "flow p=1 on 1-D/2-D quadratics", criterion_5()));
    results.push((6, "flow p=2 on 1-D/2-D quadratics", criterion_6()));
    results.push((7, "subproblem solvers match brute-force oracles", criterion_7()));
    results.push((8, "bisection λ within one cell of a 10⁴-point scan", criterion_8()));
    results.push((9, "tensor traces valid for the generic framework", criterion_9()));
    results.push((
        10,
        "default suite byte-identical on re-run, < 3 min",
        criterion_10(&tmp.path().join("a"), &tmp.path().join("b")),
    ));

    let mut failed = 0;
    for (n, what, v) in &results {
        match v {
            Ok(d) => println!("[PASS] criterion {n}: {what} ({d})"),
            Err(d) => {
                failed += 1;
                println!("[FAIL] criterion {n}: {what} ({d})");
            }
        }
    }
    println!("{} of {} criteria passed", results.len() - failed, results.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
