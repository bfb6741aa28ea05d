use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hoaccel_harness::compare::{compare, render, write_csv};
use hoaccel_harness::config::{self, ExperimentConfig, SuiteConfig};
use hoaccel_harness::experiment::{check_trace, run_experiment};
use hoaccel_harness::rates::{fit_rate, positive_prefix, running_min, FitWindow};
use hoaccel_harness::suite::run_suite;
use hoaccel_harness::summary::{self, Kind, Status};
use hoaccel_harness::{trace, Error, Result};

/// Closed-loop accelerated high-order methods: runs, flows, suites, rate
/// fits and trace audits.
#[derive(Parser)]
#[command(name = "hoaccel", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// One discrete experiment.
    Run(RunArgs),
    /// One integration of the continuous-time system.
    Flow(FlowArgs),
    /// Every problem × order × algorithm of a suite config.
    Suite(SuiteArgs),
    /// Power-law fit of a column of an existing trace.
    Rates(RatesArgs),
    /// Audit an existing trace.
    Check(CheckArgs),
    /// Table of run summaries.
    Compare(CompareArgs),
}

#[derive(Args)]
struct Common {
    /// TOML config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// `dotted.key=value` override, applied after the file (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
}

impl Common {
    fn overrides(&self, extra: Vec<String>) -> Vec<String> {
        let mut o = Vec::new();
        if let Some(s) = self.seed {
            o.push(format!("seed={s}"));
        }
        if let Some(d) = &self.out {
            o.push(format!("output.dir={}", toml_string(&d.to_string_lossy())));
        }
        o.extend(extra);
        o.extend(self.sets.iter().cloned());
        o
    }
}

fn toml_string(s: &str) -> String {
    toml::Value::String(s.to_string()).to_string()
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: Common,
    /// caf1, caf2, tensor1 or tensor2.
    #[arg(long)]
    algorithm: Option<String>,
    /// Problem name; resets the problem's parameters to defaults.
    #[arg(long)]
    problem: Option<String>,
    #[arg(long)]
    p: Option<usize>,
    #[arg(long)]
    ell: Option<f64>,
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    sigma_hat: Option<f64>,
    #[arg(long)]
    sigma_l: Option<f64>,
    #[arg(long)]
    sigma_u: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    tol_grad: Option<f64>,
}

#[derive(Args)]
struct FlowArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    problem: Option<String>,
    #[arg(long)]
    p: Option<usize>,
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long)]
    c: Option<f64>,
    #[arg(long)]
    t_end: Option<f64>,
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(Args)]
struct SuiteArgs {
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct RatesArgs {
    trace: PathBuf,
    /// Column to fit.
    #[arg(long, default_value = "f_gap")]
    column: String,
    /// Window start (index units: k or t).
    #[arg(long, requires = "to")]
    from: Option<f64>,
    #[arg(long, requires = "from")]
    to: Option<f64>,
    /// Leading fraction dropped when no explicit window is given.
    #[arg(long, default_value_t = 0.2)]
    drop: f64,
    /// Fit the running minimum of the column instead.
    #[arg(long)]
    running_min: bool,
}

#[derive(Args)]
struct CheckArgs {
    trace: PathBuf,
    /// Summary written next to the trace; defaults to `<trace>.json`.
    #[arg(long, conflicts_with = "config")]
    summary: Option<PathBuf>,
    /// Config the trace was produced with, instead of a summary.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    #[arg(required = true)]
    summaries: Vec<PathBuf>,
    /// Also write the table as CSV.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn push<T: std::fmt::Display>(o: &mut Vec<String>, key: &str, v: &Option<T>) {
    if let Some(v) = v {
        o.push(format!("{key}={v}"));
    }
}

fn problem_reset(o: &mut Vec<String>, name: &Option<String>) {
    if let Some(n) = name {
        o.push(format!("problem={{ name = {} }}", toml_string(n)));
    }
}

/// Exit code: 0 ok, 2 audit failure, 1 failed run.
fn verdict(status: Status, audit_passed: Option<bool>) -> ExitCode {
    match (status, audit_passed) {
        (Status::Failed, _) => ExitCode::from(1),
        (_, Some(false)) => ExitCode::from(2),
        _ => ExitCode::SUCCESS,
    }
}

fn cmd_run(a: RunArgs) -> Result<ExitCode> {
    let mut o = Vec::new();
    if let Some(alg) = &a.algorithm {
        o.push(format!("algorithm={}", toml_string(alg)));
    }
    problem_reset(&mut o, &a.problem);
    push(&mut o, "solver.p", &a.p);
    push(&mut o, "solver.ell", &a.ell);
    push(&mut o, "solver.theta", &a.theta);
    push(&mut o, "solver.sigma", &a.sigma);
    push(&mut o, "solver.sigma_hat", &a.sigma_hat);
    push(&mut o, "solver.sigma_l", &a.sigma_l);
    push(&mut o, "solver.sigma_u", &a.sigma_u);
    push(&mut o, "solver.max_iter", &a.max_iter);
    push(&mut o, "solver.tol_grad", &a.tol_grad);
    let cfg: ExperimentConfig = config::load(a.common.config.as_deref(), &a.common.overrides(o))?;
    report(run_experiment(&cfg, Kind::Discrete)?)
}

fn cmd_flow(a: FlowArgs) -> Result<ExitCode> {
    let mut o = Vec::new();
    problem_reset(&mut o, &a.problem);
    push(&mut o, "flow.p", &a.p);
    push(&mut o, "flow.theta", &a.theta);
    push(&mut o, "flow.c", &a.c);
    push(&mut o, "flow.t_end", &a.t_end);
    push(&mut o, "flow.abs_tol", &a.tol);
    push(&mut o, "flow.rel_tol", &a.tol);
    let cfg: ExperimentConfig = config::load(a.common.config.as_deref(), &a.common.overrides(o))?;
    report(run_experiment(&cfg, Kind::Flow)?)
}

fn report(art: hoaccel_harness::experiment::Artifacts) -> Result<ExitCode> {
    let s = &art.summary;
    if let Some(f) = &s.failure {
        eprintln!("{}: failed during {:?}: {}", s.label, f.stage, f.message);
    } else {
        let slope = |o: &summary::FitOutcome| o.fit.as_ref().map_or("-".to_string(), |f| format!("{:.3}", f.slope));
        println!(
            "{}: {} gap={} gap_slope={} grad_slope={} audit={}",
            s.label,
            s.termination.as_deref().unwrap_or("-"),
            s.final_f_gap.map_or("-".to_string(), |g| format!("{g:.3e}")),
            slope(&s.rates.f_gap),
            slope(&s.rates.grad_norm_sq),
            if s.audit_passed == Some(true) { "pass" } else { "FAIL" },
        );
        if let Some(audit) = &s.audit {
            for name in audit.failed() {
                eprintln!("  failed check: {name}");
            }
        }
    }
    if let Some(c) = &art.csv {
        println!("  trace   {}", c.display());
    }
    println!("  summary {}", art.json.display());
    Ok(verdict(s.status, s.audit_passed))
}

fn cmd_suite(a: SuiteArgs) -> Result<ExitCode> {
    let cfg: SuiteConfig = config::load(a.common.config.as_deref(), &a.common.overrides(Vec::new()))?;
    let out = cfg.output.dir.clone();
    let res = run_suite(&cfg, &out)?;
    let summaries: Vec<_> = res.runs.iter().map(|r| r.summary.clone()).collect();
    print!("{}", render(&compare(&summaries)?));
    println!("aggregate {}", res.aggregate.display());
    if summaries.iter().any(|s| s.status == Status::Failed) {
        return Ok(ExitCode::from(1));
    }
    Ok(if res.all_audits_passed() { ExitCode::SUCCESS } else { ExitCode::from(2) })
}

fn cmd_rates(a: RatesArgs) -> Result<ExitCode> {
    let text = std::fs::read_to_string(&a.trace).map_err(|source| Error::Io { path: a.trace.clone(), source })?;
    let mut series = trace::column(&text, &a.column)?;
    // Index 0 (k = 0 or t = 0) has no logarithm.
    series.retain(|(i, _)| *i > 0.0);
    if a.running_min {
        let vals: Vec<f64> = series.iter().map(|p| p.1).collect();
        for (p, m) in series.iter_mut().zip(running_min(&vals)) {
            p.1 = m;
        }
    }
    let window = match (a.from, a.to) {
        (Some(f), Some(t)) => FitWindow::Range(f, t),
        _ => FitWindow::DropFraction(a.drop),
    };
    let fit = fit_rate(positive_prefix(&series), window)?;
    println!("{}", serde_json::to_string_pretty(&fit)?);
    Ok(ExitCode::SUCCESS)
}

fn cmd_check(a: CheckArgs) -> Result<ExitCode> {
    let cfg: ExperimentConfig = match (&a.config, &a.summary) {
        (Some(c), _) => config::load(Some(c), &[])?,
        (None, Some(s)) => summary::load(s)?.config,
        (None, None) => summary::load(&a.trace.with_extension("json"))?.config,
    };
    let rep = check_trace(&a.trace, &cfg)?;
    for c in &rep.checks {
        let excess = c.worst_excess.map_or("-".to_string(), |e| format!("{e:.3e}"));
        println!(
            "{:<4} {:<28} checked={:<5} failures={:<4} worst_excess={}",
            if c.passed { "ok" } else { "FAIL" },
            c.name,
            c.checked,
            c.failures,
            excess
        );
    }
    Ok(if rep.passed() { ExitCode::SUCCESS } else { ExitCode::from(2) })
}

fn cmd_compare(a: CompareArgs) -> Result<ExitCode> {
    let summaries = a.summaries.iter().map(|p| summary::load(p)).collect::<Result<Vec<_>>>()?;
    let rows = compare(&summaries)?;
    print!("{}", render(&rows));
    if let Some(out) = &a.out {
        let f = std::fs::File::create(out).map_err(|source| Error::Io { path: out.clone(), source })?;
        write_csv(f, &rows)?;
    }
    Ok(ExitCode::SUCCESS)
}

fn dispatch(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Flow(a) => cmd_flow(a),
        Command::Suite(a) => cmd_suite(a),
        Command::Rates(a) => cmd_rates(a),
        Command::Check(a) => cmd_check(a),
        Command::Compare(a) => cmd_compare(a),
    }
}

fn main() -> ExitCode {
    // Usage errors exit 1 rather than clap's 2, which is reserved for audits.
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
