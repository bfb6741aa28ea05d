//! Side-by-side table of run summaries.

use std::io::Write;

use crate::error::{Error, Result};
use crate::summary::{Kind, Summary};

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub label: String,
    pub problem: String,
    pub method: String,
    pub p: usize,
    pub status: String,
    pub iterations: Option<usize>,
    pub total_probes: Option<usize>,
    pub final_f_gap: Option<f64>,
    pub gap_slope: Option<f64>,
    pub grad_slope: Option<f64>,
    pub audit_passed: Option<bool>,
    /// Gap slope minus that of the sibling method (tensor1 ↔ tensor2,
    /// caf1 ↔ caf2) on the same problem and order.
    pub slope_diff: Option<f64>,
}

pub const COLUMNS: [&str; 12] = [
    "label",
    "problem",
    "method",
    "p",
    "status",
    "iterations",
    "total_probes",
    "final_f_gap",
    "gap_slope",
    "grad_slope",
    "audit_passed",
    "slope_diff",
];

fn method(s: &Summary) -> String {
    match (s.kind, s.algorithm) {
        (Kind::Discrete, Some(a)) => a.name().to_string(),
        _ => "flow".to_string(),
    }
}

fn sibling(m: &str) -> Option<&'static str> {
    match m {
        "tensor1" => Some("tensor2"),
        "tensor2" => Some("tensor1"),
        "caf1" => Some("caf2"),
        "caf2" => Some("caf1"),
        _ => None,
    }
}

/// One row per summary, in input order.
pub fn compare(summaries: &[Summary]) -> Result<Vec<Row>> {
    if summaries.is_empty() {
        return Err(Error::Config("compare needs at least one summary".into()));
    }
    let mut rows: Vec<Row> = summaries
        .iter()
        .map(|s| Row {
            label: s.label.clone(),
            problem: s.problem.clone(),
            method: method(s),
            p: s.p,
            status: format!("{:?}", s.status).to_lowercase(),
            iterations: s.iterations,
            total_probes: s.total_probes,
            final_f_gap: s.final_f_gap,
            gap_slope: s.rates.f_gap.fit.as_ref().map(|f| f.slope),
            grad_slope: s.rates.grad_norm_sq.fit.as_ref().map(|f| f.slope),
            audit_passed: s.audit_passed,
            slope_diff: None,
        })
        .collect();
    for i in 0..rows.len() {
        let Some(sib) = sibling(&rows[i].method) else { continue };
        let partner = rows
            .iter()
            .find(|r| r.method == sib && r.problem == rows[i].problem && r.p == rows[i].p)
            .and_then(|r| r.gap_slope);
        rows[i].slope_diff = rows[i].gap_slope.zip(partner).map(|(a, b)| a - b);
    }
    Ok(rows)
}

fn cells(r: &Row) -> [String; 12] {
    let num = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |x| format!("{x:.3e}"));
    let slope = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |x| format!("{x:.3}"));
    let int = |v: Option<usize>| v.map_or_else(|| "-".to_string(), |x| x.to_string());
    [
        r.label.clone(),
        r.problem.clone(),
        r.method.clone(),
        r.p.to_string(),
        r.status.clone(),
        int(r.iterations),
        int(r.total_probes),
        num(r.final_f_gap),
        slope(r.gap_slope),
        slope(r.grad_slope),
        r.audit_passed.map_or_else(|| "-".to_string(), |b| if b { "pass" } else { "FAIL" }.to_string()),
        slope(r.slope_diff),
    ]
}

/// Space-aligned text table.
pub fn render(rows: &[Row]) -> String {
    let body: Vec<[String; 12]> = rows.iter().map(cells).collect();
    let mut width = COLUMNS.map(str::len);
    for r in &body {
        for (w, c) in width.iter_mut().zip(r) {
            *w = (*w).max(c.len());
        }
    }
    let line = |cs: &[String]| {
        let parts: Vec<String> = cs.iter().zip(&width).map(|(c, w)| format!("{c:<w$}")).collect();
        parts.join("  ").trim_end().to_string()
    };
    let mut out = line(&COLUMNS.map(String::from));
    out.push('\n');
    for r in &body {
        out.push_str(&line(r));
        out.push('\n');
    }
    out
}

/// The same table as CSV, with full-precision numbers.
pub fn write_csv<W: Write>(out: W, rows: &[Row]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(COLUMNS)?;
    let num = |v: Option<f64>| v.map_or_else(String::new, |x| format!("{x:e}"));
    let int = |v: Option<usize>| v.map_or_else(String::new, |x| x.to_string());
    for r in rows {
        w.write_record([
            r.label.clone(),
            r.problem.clone(),
            r.method.clone(),
            r.p.to_string(),
            r.status.clone(),
            int(r.iterations),
            int(r.total_probes),
            num(r.final_f_gap),
            num(r.gap_slope),
            num(r.grad_slope),
            r.audit_passed.map_or_else(String::new, |b| b.to_string()),
            num(r.slope_diff),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}
