//! JSON-lines proof trace.
//!
//! Line kinds, in order: `header`, `state` (iteration 0), the
//! initialization `record`s, then per iteration a `step` line carrying
//! the directions and the new iterate followed by that iteration's
//! `record`s, and finally a `footer`. Floats are written with 17
//! significant digits; non-finite values are written as `null`.

use std::io::{self, Write};

use serde::Serialize;
use serde_json::{json, Value};

use crate::monitor::InvariantRecord;
use crate::problem::SdpProblem;
use crate::scalar::Scalar;
use crate::solver::{Mode, SolveReport, SolveStatus, SolverOptions};
use crate::symvec::{SymMatrix, Vectorization};

pub const SCHEMA: &str = "cts-1";

/// Written into the header so readers know what a clean check means.
pub const BACKEND_NOTE: &str =
    "numeric re-evaluation of every contract instance from embedded snapshots; no symbolic discharge";

/// serde_json formatter that writes every float as `{:.16e}`.
#[derive(Debug, Clone, Copy, Default)]
pub struct FullPrecision;

impl serde_json::ser::Formatter for FullPrecision {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        write!(writer, "{:.16e}", f64::from(value))
    }
}

/// Serializes `value` on one line with [`FullPrecision`].
pub fn to_line<S: Serialize>(value: &S) -> io::Result<Vec<u8>> {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, FullPrecision);
    value.serialize(&mut ser).map_err(io::Error::other)?;
    Ok(out)
}

fn num<T: Scalar>(v: T) -> Value {
    let v = v.as_f64();
    if v.is_finite() {
        json!(v)
    } else {
        Value::Null
    }
}

fn vector<T: Scalar>(v: &[T]) -> Value {
    Value::Array(v.iter().map(|&x| num(x)).collect())
}

fn matrix<T: Scalar>(s: &SymMatrix<T>) -> Value {
    Value::Array(s.to_rows().iter().map(|r| vector(r)).collect())
}

fn scalar_name<T: Scalar>() -> &'static str {
    if std::mem::size_of::<T>() == 4 {
        "f32"
    } else {
        "f64"
    }
}

pub(crate) fn options_value<T: Scalar>(opts: &SolverOptions<T>, cap: usize) -> Value {
    json!({
        "epsilon": num(opts.epsilon),
        "sigma": num(opts.sigma),
        "nu": opts.nu.map_or(Value::Null, num),
        "gap_ceiling": num(opts.gap_ceiling),
        "mode": match opts.mode { Mode::Strict => "strict", Mode::Audit => "audit" },
        "max_iterations": cap,
        "tolerances": {
            "lsqr_consistency": num(opts.tolerances.lsqr_consistency),
            "pd_margin": num(opts.tolerances.pd_margin),
            "identity_check": num(opts.tolerances.identity_check),
        },
    })
}

/// Trace lines as JSON values, in output order.
pub fn trace_values<T: Scalar>(prob: &SdpProblem<T>, report: &SolveReport<T>) -> Vec<Value> {
    let mut lines = Vec::new();
    lines.push(json!({
        "type": "header",
        "schema": SCHEMA,
        "tool": crate::TOOL_VERSION,
        "problem_hash": prob.fingerprint(),
        "n": prob.n(),
        "m": prob.m(),
        "scalar": scalar_name::<T>(),
        "vectorization": Vectorization::Vecs.name(),
        "options": options_value(&report.options, report.iteration_cap),
        "backend": BACKEND_NOTE,
    }));
    let s0 = &report.initial;
    lines.push(json!({
        "type": "state",
        "iteration": 0,
        "X": matrix(&s0.x),
        "Z": matrix(&s0.z),
        "p": vector(&s0.p),
        "phi": num(s0.phi),
        "phim": num(s0.phim),
        "mu": num(s0.mu),
    }));
    let record = |r: &InvariantRecord| {
        let mut v = serde_json::to_value(r).expect("records serialize");
        v.as_object_mut()
            .expect("record is an object")
            .insert("type".into(), json!("record"));
        v
    };
    lines.extend(report.init_records.iter().map(record));
    for h in &report.history {
        let s = &h.state;
        lines.push(json!({
            "type": "step",
            "iteration": h.iteration,
            "dX": matrix(&h.dx),
            "dZ": matrix(&h.dz),
            "dp": vector(&h.dp),
            "X": matrix(&s.x),
            "Z": matrix(&s.z),
            "p": vector(&s.p),
            "phi": num(s.phi),
            "phim": num(s.phim),
            "mu": num(s.mu),
        }));
        lines.extend(h.records.iter().map(record));
    }
    let b = &report.budget;
    let violation = match &report.status {
        SolveStatus::InvariantViolation { id, iteration } => {
            json!({"id": id, "iteration": iteration})
        }
        _ => Value::Null,
    };
    lines.push(json!({
        "type": "footer",
        "status": report.status.name(),
        "violation": violation,
        "iterations": report.iterations(),
        "final_gap": num(report.final_gap()),
        "budget": {
            "initial_gap": num(b.initial_gap),
            "epsilon": num(b.epsilon),
            "sigma": num(b.sigma),
            "bound_iterations": b.bound_iterations,
        },
    }));
    lines
}

/// Writes the trace for a finished (or aborted) solve.
pub fn write_trace<T: Scalar, W: Write>(
    prob: &SdpProblem<T>,
    report: &SolveReport<T>,
    mut sink: W,
) -> io::Result<()> {
    for v in trace_values(prob, report) {
        sink.write_all(&to_line(&v)?)?;
        sink.write_all(b"\n")?;
    }
    sink.flush()
}

/// [`write_trace`] into a byte buffer.
pub fn trace_bytes<T: Scalar>(prob: &SdpProblem<T>, report: &SolveReport<T>) -> Vec<u8> {
    let mut out = Vec::new();
    write_trace(prob, report, &mut out).expect("writing to a Vec cannot fail");
    out
}
