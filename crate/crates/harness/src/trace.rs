//! CSV traces. Floats are written in shortest round-trip `{:e}` form and
//! vectors as `;`-joined lists, so a trace reads back bit-for-bit.

use std::io::{Read, Write};

use hoaccel::accel::IterateRecord;
use hoaccel::flow::FlowSample;

use crate::error::{Error, Result};

pub const DISCRETE_COLUMNS: [&str; 15] = [
    "k",
    "lambda",
    "accumulator",
    "f_gap",
    "grad_norm_sq",
    "hpe_lhs",
    "hpe_rhs",
    "large_step_value",
    "lyapunov",
    "probe_count",
    "eps",
    "x",
    "v",
    "tilde_v",
    "w",
];

pub const FLOW_COLUMNS: [&str; 11] =
    ["t", "a", "lambda", "f_gap", "grad_norm_sq", "lyapunov", "algebraic_residual", "a_dot", "s", "x", "v"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceKind {
    Discrete,
    Flow,
}

fn num(v: f64) -> String {
    format!("{v:e}")
}

fn vector(v: &[f64]) -> String {
    v.iter().map(|x| num(*x)).collect::<Vec<_>>().join(";")
}

pub fn write_discrete<W: Write>(out: W, records: &[IterateRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(DISCRETE_COLUMNS)?;
    for r in records {
        w.write_record([
            r.k.to_string(),
            num(r.lambda),
            num(r.accumulator),
            num(r.f_gap),
            num(r.grad_norm_sq),
            num(r.hpe_lhs),
            num(r.hpe_rhs),
            num(r.large_step_value),
            num(r.lyapunov),
            r.probe_count.to_string(),
            num(r.eps),
            vector(&r.x),
            vector(&r.v),
            vector(&r.tilde_v),
            vector(&r.w),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn write_flow<W: Write>(out: W, samples: &[FlowSample]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(FLOW_COLUMNS)?;
    for s in samples {
        w.write_record([
            num(s.t),
            num(s.a),
            num(s.lambda),
            num(s.f_gap),
            num(s.grad_norm_sq),
            num(s.lyapunov),
            num(s.algebraic_residual),
            num(s.a_dot),
            num(s.s),
            vector(&s.x),
            vector(&s.v),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

struct Row<'a> {
    line: usize,
    rec: &'a csv::StringRecord,
}

impl Row<'_> {
    fn text(&self, i: usize) -> &str {
        self.rec.get(i).unwrap_or("")
    }

    fn f64(&self, i: usize) -> Result<f64> {
        self.text(i).parse().map_err(|_| self.bad(i))
    }

    fn usize(&self, i: usize) -> Result<usize> {
        self.text(i).parse().map_err(|_| self.bad(i))
    }

    fn vec(&self, i: usize) -> Result<Vec<f64>> {
        let t = self.text(i);
        if t.is_empty() {
            return Ok(Vec::new());
        }
        t.split(';').map(|x| x.parse().map_err(|_| self.bad(i))).collect()
    }

    fn bad(&self, i: usize) -> Error {
        Error::Trace(format!("line {}: cannot parse `{}`", self.line, self.text(i)))
    }
}

fn read_rows<R: Read, T>(input: R, columns: &[&str], mut f: impl FnMut(&Row) -> Result<T>) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers()?.clone();
    if header.iter().ne(columns.iter().copied()) {
        return Err(Error::Trace(format!(
            "unexpected columns {:?}, want {:?}",
            header.iter().collect::<Vec<_>>(),
            columns
        )));
    }
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        out.push(f(&Row { line: i + 2, rec: &rec })?);
    }
    Ok(out)
}

pub fn read_discrete<R: Read>(input: R) -> Result<Vec<IterateRecord>> {
    read_rows(input, &DISCRETE_COLUMNS, |r| {
        Ok(IterateRecord {
            k: r.usize(0)?,
            lambda: r.f64(1)?,
            accumulator: r.f64(2)?,
            f_gap: r.f64(3)?,
            grad_norm_sq: r.f64(4)?,
            hpe_lhs: r.f64(5)?,
            hpe_rhs: r.f64(6)?,
            large_step_value: r.f64(7)?,
            lyapunov: r.f64(8)?,
            probe_count: r.usize(9)?,
            eps: r.f64(10)?,
            x: r.vec(11)?,
            v: r.vec(12)?,
            tilde_v: r.vec(13)?,
            w: r.vec(14)?,
        })
    })
}

pub fn read_flow<R: Read>(input: R) -> Result<Vec<FlowSample>> {
    read_rows(input, &FLOW_COLUMNS, |r| {
        Ok(FlowSample {
            t: r.f64(0)?,
            a: r.f64(1)?,
            lambda: r.f64(2)?,
            f_gap: r.f64(3)?,
            grad_norm_sq: r.f64(4)?,
            lyapunov: r.f64(5)?,
            algebraic_residual: r.f64(6)?,
            a_dot: r.f64(7)?,
            s: r.f64(8)?,
            x: r.vec(9)?,
            v: r.vec(10)?,
        })
    })
}

/// Kind of trace, from the first header field.
pub fn detect(text: &str) -> Result<TraceKind> {
    match text.split([',', '\n', '\r']).next() {
        Some("k") => Ok(TraceKind::Discrete),
        Some("t") => Ok(TraceKind::Flow),
        other => Err(Error::Trace(format!("unrecognised trace header starting with {other:?}"))),
    }
}

/// `(index, column)` pairs of a numeric column; the index is `k` or `t`.
pub fn column(text: &str, name: &str) -> Result<Vec<(f64, f64)>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header = r.headers()?.clone();
    let idx = header.iter().position(|h| h == name).ok_or_else(|| Error::Trace(format!("no column `{name}`")))?;
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let parse = |i: usize| -> Result<f64> {
            let t = rec.get(i).unwrap_or("");
            t.parse().map_err(|_| Error::Trace(format!("column `{name}`: cannot parse `{t}`")))
        };
        out.push((parse(0)?, parse(idx)?));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(k: usize) -> IterateRecord {
        IterateRecord {
            k,
            lambda: 0.1 * k as f64,
            accumulator: 1.0 / 3.0,
            f_gap: 1e-300,
            grad_norm_sq: f64::NAN,
            hpe_lhs: 0.0,
            hpe_rhs: f64::INFINITY,
            large_step_value: -0.0,
            lyapunov: std::f64::consts::PI,
            probe_count: 7,
            eps: 0.0,
            x: vec![1.0, -2.5e-17],
            v: vec![3.0, 4.0],
            tilde_v: vec![0.1, 0.2],
            w: vec![],
        }
    }

    fn same(a: &IterateRecord, b: &IterateRecord) -> bool {
        let bits = |r: &IterateRecord| {
            let mut v = vec![r.lambda, r.accumulator, r.f_gap, r.grad_norm_sq, r.hpe_lhs, r.hpe_rhs];
            v.extend([r.large_step_value, r.lyapunov, r.eps]);
            v.extend(&r.x);
            v.extend(&r.v);
            v.extend(&r.tilde_v);
            v.extend(&r.w);
            v.iter().map(|x| x.to_bits()).collect::<Vec<_>>()
        };
        a.k == b.k && a.probe_count == b.probe_count && bits(a) == bits(b)
    }

    #[test]
    fn discrete_round_trip_is_exact() {
        let recs = vec![record(0), record(1), record(2)];
        let mut buf = Vec::new();
        write_discrete(&mut buf, &recs).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with(
            "k,lambda,accumulator,f_gap,grad_norm_sq,hpe_lhs,hpe_rhs,large_step_value,lyapunov,probe_count"
        ));
        let back = read_discrete(buf.as_slice()).unwrap();
        assert!(recs.iter().zip(&back).all(|(a, b)| same(a, b)));
        assert_eq!(detect(&text).unwrap(), TraceKind::Discrete);
    }

    #[test]
    fn flow_round_trip() {
        let s = FlowSample {
            t: 0.05,
            s: 0.1,
            a: 0.3,
            a_dot: 0.2,
            lambda: 0.5,
            f_gap: 1e-9,
            grad_norm_sq: 2e-9,
            lyapunov: 1.5,
            algebraic_residual: 0.0,
            x: vec![1.0],
            v: vec![2.0],
        };
        let mut buf = Vec::new();
        write_flow(&mut buf, std::slice::from_ref(&s)).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("t,a,lambda,f_gap,grad_norm_sq,lyapunov,algebraic_residual"));
        assert_eq!(read_flow(buf.as_slice()).unwrap(), vec![s]);
        assert_eq!(detect(&text).unwrap(), TraceKind::Flow);
        assert_eq!(column(&text, "f_gap").unwrap(), vec![(0.05, 1e-9)]);
    }

    #[test]
    fn every_record_field_has_one_column() {
        let json = serde_json::to_value(record(1)).unwrap();
        let fields: Vec<&String> = json.as_object().unwrap().keys().collect();
        assert_eq!(fields.len(), DISCRETE_COLUMNS.len());
        for f in fields {
            assert_eq!(DISCRETE_COLUMNS.iter().filter(|c| *c == f).count(), 1, "{f}");
        }
    }

    #[test]
    fn every_flow_field_has_one_column() {
        let s = FlowSample {
            t: 0.0,
            s: 0.0,
            a: 0.0,
            a_dot: 0.0,
            lambda: 0.0,
            f_gap: 0.0,
            grad_norm_sq: 0.0,
            lyapunov: 0.0,
            algebraic_residual: 0.0,
            x: vec![],
            v: vec![],
        };
        let json = serde_json::to_value(s).unwrap();
        let fields: Vec<&String> = json.as_object().unwrap().keys().collect();
        assert_eq!(fields.len(), FLOW_COLUMNS.len());
        for f in fields {
            assert!(FLOW_COLUMNS.contains(&f.as_str()), "{f}");
        }
    }

    #[test]
    fn wrong_header_rejected() {
        assert!(read_discrete("a,b\n1,2\n".as_bytes()).is_err());
        assert!(detect("q,r\n").is_err());
        let mut buf = Vec::new();
        write_discrete(&mut buf, &[record(0)]).unwrap();
        let text = String::from_utf8(buf).unwrap().replace(",7,", ",seven,");
        assert!(read_discrete(text.as_bytes()).is_err());
    }
}
