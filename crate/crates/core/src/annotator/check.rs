//! Independent re-check of a proof trace.
//!
//! The checker rebuilds every iterate from the embedded snapshots,
//! re-derives the scaling matrices from the previous iterate, and
//! re-evaluates every contract with the monitor. It never calls the
//! solver's linear solves, so a trace can only pass if its stored
//! directions actually satisfy the contracts.

use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;
use serde_json::Value;

use super::trace::SCHEMA;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::monitor::{
    check_initialization, check_iteration, iteration_bound, InvariantRecord, MonitorConfig,
};
use crate::problem::{duality_gap, SdpProblem};
use crate::scalar::Scalar;
use crate::solver::{IterateState, NewtonStep};
use crate::symvec::SymMatrix;

/// Relative tolerance for comparing stored and recomputed values.
pub const SERIALIZATION_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FindingKind {
    ValueMismatch,
    BoundMismatch,
    VerdictMismatch,
    MissingRecord,
    DuplicateRecord,
    UnexpectedRecord,
    SnapshotInconsistent,
    AsymmetricSnapshot,
    FooterMismatch,
    BudgetViolation,
    StatusInconsistent,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Finding {
    pub kind: FindingKind,
    pub iteration: Option<usize>,
    pub id: Option<String>,
    pub detail: String,
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.kind)?;
        if let Some(it) = self.iteration {
            write!(f, " at iteration {it}")?;
        }
        if let Some(id) = &self.id {
            write!(f, " [{id}]")?;
        }
        write!(f, ": {}", self.detail)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckReport {
    pub findings: Vec<Finding>,
    pub records_checked: usize,
    pub iterations: usize,
    pub status: String,
}

impl CheckReport {
    pub fn is_clean(&self) -> bool {
        self.findings.is_empty()
    }

    pub fn has(&self, kind: FindingKind, id: Option<&str>, iteration: Option<usize>) -> bool {
        self.findings.iter().any(|f| {
            f.kind == kind
                && id.is_none_or(|id| f.id.as_deref() == Some(id))
                && iteration.is_none_or(|it| f.iteration == Some(it))
        })
    }
}

/// `true` when `a` and `b` agree to the serialization tolerance. Two NaNs
/// agree.
pub fn close(a: f64, b: f64) -> bool {
    if a.is_nan() || b.is_nan() {
        return a.is_nan() && b.is_nan();
    }
    (a - b).abs() <= SERIALIZATION_TOL * a.abs().max(b.abs()) + f64::MIN_POSITIVE
}

struct Line {
    number: usize,
    value: Value,
}

fn perr(line: usize, message: impl Into<String>) -> Error {
    Error::TraceParse {
        line,
        message: message.into(),
    }
}

fn field<'a>(l: &'a Line, key: &str) -> Result<&'a Value> {
    l.value
        .get(key)
        .ok_or_else(|| perr(l.number, format!("missing field {key:?}")))
}

fn float(l: &Line, key: &str) -> Result<f64> {
    match field(l, key)? {
        Value::Null => Ok(f64::NAN),
        v => v
            .as_f64()
            .ok_or_else(|| perr(l.number, format!("{key:?} is not a number"))),
    }
}

fn count(l: &Line, key: &str) -> Result<usize> {
    field(l, key)?
        .as_u64()
        .map(|v| v as usize)
        .ok_or_else(|| perr(l.number, format!("{key:?} is not a count")))
}

fn floats(l: &Line, v: &Value, what: &str) -> Result<Vec<f64>> {
    v.as_array()
        .ok_or_else(|| perr(l.number, format!("{what} is not an array")))?
        .iter()
        .map(|x| match x {
            Value::Null => Ok(f64::NAN),
            x => x
                .as_f64()
                .ok_or_else(|| perr(l.number, format!("{what} holds a non-number"))),
        })
        .collect()
}

fn vector<T: Scalar>(l: &Line, key: &str, len: usize) -> Result<Vec<T>> {
    let v = floats(l, field(l, key)?, key)?;
    if v.len() != len {
        return Err(perr(
            l.number,
            format!("{key:?} has length {} (expected {len})", v.len()),
        ));
    }
    Ok(v.into_iter().map(T::lit).collect())
}

fn square<T: Scalar>(l: &Line, key: &str, n: usize) -> Result<Matrix<T>> {
    let rows = field(l, key)?
        .as_array()
        .ok_or_else(|| perr(l.number, format!("{key:?} is not a matrix")))?;
    if rows.len() != n {
        return Err(perr(
            l.number,
            format!("{key:?} has {} rows (expected {n})", rows.len()),
        ));
    }
    let mut data = Vec::with_capacity(n * n);
    for r in rows {
        let r = floats(l, r, key)?;
        if r.len() != n {
            return Err(perr(
                l.number,
                format!("{key:?} row has {} entries (expected {n})", r.len()),
            ));
        }
        data.extend(r.into_iter().map(T::lit));
    }
    Ok(Matrix::from_row_major(n, n, data).expect("shape checked"))
}

struct Checker<'p, T> {
    prob: &'p SdpProblem<T>,
    findings: Vec<Finding>,
    records_checked: usize,
}

impl<T: Scalar> Checker<'_, T> {
    fn find(
        &mut self,
        kind: FindingKind,
        iteration: Option<usize>,
        id: Option<&str>,
        detail: String,
    ) {
        self.findings.push(Finding {
            kind,
            iteration,
            id: id.map(str::to_string),
            detail,
        });
    }

    fn sym(&mut self, l: &Line, key: &str, iteration: usize) -> Result<SymMatrix<T>> {
        let m = square::<T>(l, key, self.prob.n())?;
        let n = m.rows();
        for i in 0..n {
            for j in (i + 1)..n {
                let (a, b) = (m[(i, j)].as_f64(), m[(j, i)].as_f64());
                if !close(a, b) {
                    self.find(
                        FindingKind::AsymmetricSnapshot,
                        Some(iteration),
                        None,
                        format!("{key}({i},{j}) = {a:e} but {key}({j},{i}) = {b:e}"),
                    );
                }
            }
        }
        Ok(SymMatrix::symmetrize(&m))
    }

    fn same(&mut self, iteration: usize, what: &str, stored: T, expected: T) {
        let (a, b) = (stored.as_f64(), expected.as_f64());
        if !close(a, b) {
            self.find(
                FindingKind::SnapshotInconsistent,
                Some(iteration),
                None,
                format!("{what}: stored {a:e}, recomputed {b:e}"),
            );
        }
    }

    fn same_matrix(
        &mut self,
        iteration: usize,
        what: &str,
        stored: &SymMatrix<T>,
        expected: &SymMatrix<T>,
    ) {
        let (a, b) = (
            stored.as_matrix().as_slice(),
            expected.as_matrix().as_slice(),
        );
        if let Some(k) = (0..a.len()).find(|&k| !close(a[k].as_f64(), b[k].as_f64())) {
            let n = stored.n();
            self.find(
                FindingKind::SnapshotInconsistent,
                Some(iteration),
                None,
                format!(
                    "{what}({},{}): stored {:e}, recomputed {:e}",
                    k / n,
                    k % n,
                    a[k].as_f64(),
                    b[k].as_f64()
                ),
            );
        }
    }

    fn same_vector(&mut self, iteration: usize, what: &str, stored: &[T], expected: &[T]) {
        if let Some(k) =
            (0..stored.len()).find(|&k| !close(stored[k].as_f64(), expected[k].as_f64()))
        {
            self.find(
                FindingKind::SnapshotInconsistent,
                Some(iteration),
                None,
                format!(
                    "{what}[{k}]: stored {:e}, recomputed {:e}",
                    stored[k].as_f64(),
                    expected[k].as_f64()
                ),
            );
        }
    }

    /// Compares stored records of one group with the recomputed ones.
    fn compare(
        &mut self,
        iteration: usize,
        stored: &[(usize, InvariantRecord)],
        expected: Vec<InvariantRecord>,
    ) {
        let mut by_id: BTreeMap<&str, &InvariantRecord> = BTreeMap::new();
        for (line, r) in stored {
            self.records_checked += 1;
            if r.iteration != iteration {
                self.find(
                    FindingKind::UnexpectedRecord,
                    Some(iteration),
                    Some(&r.id),
                    format!(
                        "line {line} carries iteration {} inside group {iteration}",
                        r.iteration
                    ),
                );
            }
            if by_id.insert(&r.id, r).is_some() {
                self.find(
                    FindingKind::DuplicateRecord,
                    Some(iteration),
                    Some(&r.id),
                    format!("line {line} repeats the record"),
                );
            }
        }
        let expected_ids: Vec<String> = expected.iter().map(|r| r.id.clone()).collect();
        for id in by_id.keys() {
            if !expected_ids.iter().any(|e| e == id) {
                self.find(
                    FindingKind::UnexpectedRecord,
                    Some(iteration),
                    Some(id),
                    "record id is not in the catalog for this group".into(),
                );
            }
        }
        for exp in &expected {
            let Some(got) = by_id.get(exp.id.as_str()) else {
                self.find(
                    FindingKind::MissingRecord,
                    Some(iteration),
                    Some(&exp.id),
                    "catalog entry absent from trace".into(),
                );
                continue;
            };
            let id = Some(exp.id.as_str());
            if !close(got.bound, exp.bound) || got.kind != exp.kind {
                self.find(
                    FindingKind::BoundMismatch,
                    Some(iteration),
                    id,
                    format!(
                        "stored bound {:e} ({:?}), recomputed {:e} ({:?})",
                        got.bound, got.kind, exp.bound, exp.kind
                    ),
                );
            }
            if !close(got.measured, exp.measured) || !close(got.slack, exp.slack) {
                self.find(
                    FindingKind::ValueMismatch,
                    Some(iteration),
                    id,
                    format!(
                        "stored measured {:e} / slack {:e}, recomputed {:e} / {:e}",
                        got.measured, got.slack, exp.measured, exp.slack
                    ),
                );
            }
            let comps_match = got.components.len() == exp.components.len()
                && exp
                    .components
                    .iter()
                    .all(|(k, v)| got.components.get(k).is_some_and(|g| close(*g, *v)));
            if !comps_match {
                self.find(
                    FindingKind::ValueMismatch,
                    Some(iteration),
                    id,
                    format!(
                        "components {:?} differ from recomputed {:?}",
                        got.components, exp.components
                    ),
                );
            }
            if got.passed != exp.passed || got.paper_anchor != exp.paper_anchor {
                self.find(
                    FindingKind::VerdictMismatch,
                    Some(iteration),
                    id,
                    format!(
                        "stored passed={} anchor={:?}, recomputed passed={} anchor={:?}",
                        got.passed, got.paper_anchor, exp.passed, exp.paper_anchor
                    ),
                );
            }
        }
    }
}

fn parse_lines(bytes: &[u8]) -> Result<Vec<Line>> {
    let text = std::str::from_utf8(bytes).map_err(|e| perr(0, format!("not UTF-8: {e}")))?;
    let mut out = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        if raw.trim().is_empty() {
            continue;
        }
        let value: Value = serde_json::from_str(raw).map_err(|e| perr(k + 1, e.to_string()))?;
        if value.get("type").and_then(Value::as_str).is_none() {
            return Err(perr(k + 1, "line has no \"type\""));
        }
        out.push(Line {
            number: k + 1,
            value,
        });
    }
    Ok(out)
}

fn kind(l: &Line) -> &str {
    l.value["type"].as_str().unwrap_or_default()
}

fn take_records(lines: &[Line], pos: &mut usize) -> Result<Vec<(usize, InvariantRecord)>> {
    let mut out = Vec::new();
    while *pos < lines.len() && kind(&lines[*pos]) == "record" {
        let l = &lines[*pos];
        let mut v = l.value.clone();
        v.as_object_mut().expect("object").remove("type");
        let r: InvariantRecord =
            serde_json::from_value(v).map_err(|e| perr(l.number, e.to_string()))?;
        out.push((l.number, r));
        *pos += 1;
    }
    Ok(out)
}

/// Re-checks a trace against the problem it claims to describe.
///
/// Parse failures, a schema other than the current one and a problem
/// hash mismatch are errors; everything else is reported as findings.
pub fn check_trace<T: Scalar>(bytes: &[u8], prob: &SdpProblem<T>) -> Result<CheckReport> {
    let lines = parse_lines(bytes)?;
    let header = lines.first().ok_or_else(|| perr(0, "empty trace"))?;
    if kind(header) != "header" {
        return Err(perr(header.number, "first line is not a header"));
    }
    let schema = field(header, "schema")?.as_str().unwrap_or_default();
    if schema != SCHEMA {
        return Err(Error::SchemaMismatch {
            found: schema.to_string(),
            expected: SCHEMA.to_string(),
        });
    }
    let hash = field(header, "problem_hash")?.as_str().unwrap_or_default();
    let expected_hash = prob.fingerprint();
    if hash != expected_hash {
        return Err(Error::HashMismatch {
            trace: hash.to_string(),
            problem: expected_hash,
        });
    }
    let opts_line = Line {
        number: header.number,
        value: field(header, "options")?.clone(),
    };
    let tol_line = Line {
        number: header.number,
        value: field(&opts_line, "tolerances")?.clone(),
    };
    let cfg = MonitorConfig {
        sigma: T::lit(float(&opts_line, "sigma")?),
        gap_ceiling: T::lit(float(&opts_line, "gap_ceiling")?),
        identity_tol: T::lit(float(&tol_line, "identity_check")?),
        pd_margin: T::lit(float(&tol_line, "pd_margin")?),
        epsilon: T::lit(float(&opts_line, "epsilon")?),
    };
    let cap = count(&opts_line, "max_iterations")?;
    let strict = field(&opts_line, "mode")?.as_str() == Some("strict");

    let n = prob.n();
    let m = prob.m();
    let nt = T::from_count(n);
    let mut ck = Checker {
        prob,
        findings: Vec::new(),
        records_checked: 0,
    };

    let mut pos = 1;
    let s0 = lines
        .get(pos)
        .ok_or_else(|| perr(0, "missing initial state"))?;
    if kind(s0) != "state" {
        return Err(perr(s0.number, "expected the initial state line"));
    }
    pos += 1;
    let x0 = ck.sym(s0, "X", 0)?;
    let z0 = ck.sym(s0, "Z", 0)?;
    let p0: Vec<T> = vector(s0, "p", m)?;
    let state0 = IterateState {
        xm: x0.clone(),
        zm: z0.clone(),
        pm: p0.clone(),
        mu: T::lit(float(s0, "mu")?),
        phi: T::lit(float(s0, "phi")?),
        phim: T::lit(float(s0, "phim")?),
        x: x0,
        z: z0,
        p: p0,
        iteration: 0,
    };
    let gap0 = duality_gap(&state0.x, &state0.z);
    ck.same(0, "phi", state0.phi, gap0);
    ck.same(0, "mu", state0.mu, gap0 / nt);
    ck.same(0, "phim", state0.phim, gap0 / cfg.sigma);
    let init = take_records(&lines, &mut pos)?;
    ck.compare(0, &init, check_initialization(prob, &state0, &cfg));

    let mut init_failure: Option<String> = None;
    for (_, r) in &init {
        if !r.passed && init_failure.is_none() {
            init_failure = Some(r.id.clone());
        }
    }

    let mut prev = state0.clone();
    let mut steps = 0usize;
    let mut first_failure: Option<(String, usize)> = None;
    while pos < lines.len() && kind(&lines[pos]) == "step" {
        let l = &lines[pos];
        pos += 1;
        let it = count(l, "iteration")?;
        steps += 1;
        if it != prev.iteration + 1 {
            ck.find(
                FindingKind::SnapshotInconsistent,
                Some(it),
                None,
                format!("step numbered {it} follows iteration {}", prev.iteration),
            );
        }
        if !(prev.phi > cfg.epsilon) {
            ck.find(
                FindingKind::StatusInconsistent,
                Some(it),
                None,
                "step taken although the gap was already at or below epsilon".into(),
            );
        }
        let dx = ck.sym(l, "dX", it)?;
        let dz = ck.sym(l, "dZ", it)?;
        let dp: Vec<T> = vector(l, "dp", m)?;
        let x = ck.sym(l, "X", it)?;
        let z = ck.sym(l, "Z", it)?;
        let p: Vec<T> = vector(l, "p", m)?;
        ck.same_matrix(it, "X", &x, &prev.x.add(&dx));
        ck.same_matrix(it, "Z", &z, &prev.z.add(&dz));
        let p_sum: Vec<T> = prev.p.iter().zip(&dp).map(|(&a, &b)| a + b).collect();
        ck.same_vector(it, "p", &p, &p_sum);

        let next = IterateState {
            xm: prev.x.clone(),
            zm: prev.z.clone(),
            pm: prev.p.clone(),
            mu: T::lit(float(l, "mu")?),
            phi: T::lit(float(l, "phi")?),
            phim: T::lit(float(l, "phim")?),
            x,
            z,
            p,
            iteration: it,
        };
        let gap = duality_gap(&next.x, &next.z);
        ck.same(it, "phi", next.phi, gap);
        ck.same(it, "phim", next.phim, duality_gap(&prev.x, &prev.z));
        ck.same(it, "mu", next.mu, gap / nt);

        let stored = take_records(&lines, &mut pos)?;
        match NewtonStep::from_directions(prob, &prev, cfg.sigma, cfg.pd_margin, dx, dz, dp) {
            Ok(step) => ck.compare(
                it,
                &stored,
                check_iteration(prob, &prev, &step, &next, &cfg),
            ),
            Err(e) => ck.find(
                FindingKind::SnapshotInconsistent,
                Some(it),
                None,
                format!("cannot rebuild scaling from the previous iterate: {e}"),
            ),
        }
        if first_failure.is_none() {
            if let Some((_, r)) = stored.iter().find(|(_, r)| !r.passed) {
                first_failure = Some((r.id.clone(), it));
            }
        }
        prev = next;
    }

    let footer = lines.get(pos).ok_or_else(|| perr(0, "missing footer"))?;
    if kind(footer) != "footer" {
        return Err(perr(
            footer.number,
            format!("unexpected {:?} line", kind(footer)),
        ));
    }
    if pos + 1 != lines.len() {
        return Err(perr(lines[pos + 1].number, "content after footer"));
    }
    let status = field(footer, "status")?
        .as_str()
        .unwrap_or_default()
        .to_string();
    let iterations = count(footer, "iterations")?;
    if iterations != steps {
        ck.find(
            FindingKind::FooterMismatch,
            None,
            None,
            format!("footer claims {iterations} iterations, trace has {steps}"),
        );
    }
    let final_gap = float(footer, "final_gap")?;
    if !close(final_gap, prev.phi.as_f64()) {
        ck.find(
            FindingKind::FooterMismatch,
            None,
            None,
            format!(
                "footer final gap {final_gap:e} differs from last phi {:e}",
                prev.phi.as_f64()
            ),
        );
    }

    let budget_line = Line {
        number: footer.number,
        value: field(footer, "budget")?.clone(),
    };
    match iteration_bound(state0.phi, cfg.epsilon, cfg.sigma) {
        Ok(b) => {
            let stored = count(&budget_line, "bound_iterations")?;
            if stored != b.bound_iterations
                || !close(float(&budget_line, "initial_gap")?, b.initial_gap.as_f64())
                || !close(float(&budget_line, "epsilon")?, b.epsilon.as_f64())
                || !close(float(&budget_line, "sigma")?, b.sigma.as_f64())
            {
                ck.find(
                    FindingKind::FooterMismatch,
                    None,
                    None,
                    format!(
                        "stored budget differs from recomputed bound {}",
                        b.bound_iterations
                    ),
                );
            }
            if status == "Converged" && steps > b.bound_iterations {
                ck.find(
                    FindingKind::BudgetViolation,
                    None,
                    None,
                    format!("{steps} iterations exceed the bound {}", b.bound_iterations),
                );
            }
        }
        Err(e) => ck.find(
            FindingKind::FooterMismatch,
            None,
            None,
            format!("budget not computable: {e}"),
        ),
    }

    let violation = field(footer, "violation")?;
    let consistent = match status.as_str() {
        "Converged" => {
            !(prev.phi > cfg.epsilon)
                && violation.is_null()
                && (!strict || first_failure.is_none() && init_failure.is_none())
        }
        "DivergenceGuard" => prev.phi - prev.phim > T::zero() && violation.is_null(),
        "IterationCap" => steps == cap && prev.phi > cfg.epsilon && violation.is_null(),
        "InvariantViolation" => {
            let claimed = (
                violation
                    .get("id")
                    .and_then(Value::as_str)
                    .map(str::to_string),
                violation
                    .get("iteration")
                    .and_then(Value::as_u64)
                    .map(|v| v as usize),
            );
            let actual = match (&init_failure, &first_failure) {
                (Some(id), _) => Some((id.clone(), 0)),
                (None, Some(f)) => Some(f.clone()),
                (None, None) => None,
            };
            strict && actual.is_some_and(|(id, it)| claimed == (Some(id), Some(it)))
        }
        _ => false,
    };
    if !consistent {
        ck.find(
            FindingKind::StatusInconsistent,
            None,
            None,
            format!(
                "footer status {status:?} (violation {violation}) does not follow from the trace"
            ),
        );
    }

    Ok(CheckReport {
        findings: ck.findings,
        records_checked: ck.records_checked,
        iterations: steps,
        status,
    })
}
