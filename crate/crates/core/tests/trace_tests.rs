use credible_sdp::annotator::{trace_bytes, FindingKind, SCHEMA};
use credible_sdp::synth::random_feasible;
use credible_sdp::{check_trace, running_example, solve, Error, Mode, SdpProblem, SolverOptions};
use proptest::prelude::*;
use serde_json::Value;

fn example() -> SdpProblem<f64> {
    running_example()
}

fn trace_with(prob: &SdpProblem<f64>, edit: impl FnOnce(&mut SolverOptions<f64>)) -> Vec<u8> {
    let mut opts = SolverOptions::for_problem(prob).unwrap();
    edit(&mut opts);
    let report = solve(prob, &opts, |_, _, _| {}).unwrap();
    trace_bytes(prob, &report)
}

fn lines(bytes: &[u8]) -> Vec<Value> {
    std::str::from_utf8(bytes)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

fn join(values: &[Value]) -> Vec<u8> {
    let mut out = String::new();
    for v in values {
        out.push_str(&serde_json::to_string(v).unwrap());
        out.push('\n');
    }
    out.into_bytes()
}

fn step_index(values: &[Value], iteration: u64) -> usize {
    values
        .iter()
        .position(|v| v["type"] == "step" && v["iteration"] == iteration)
        .unwrap()
}

fn record_index(values: &[Value], id: &str, iteration: u64) -> usize {
    values
        .iter()
        .position(|v| v["type"] == "record" && v["id"] == id && v["iteration"] == iteration)
        .unwrap()
}

#[test]
fn fresh_trace_checks_clean() {
    let prob = example();
    let bytes = trace_with(&prob, |_| {});
    let values = lines(&bytes);
    assert_eq!(values[0]["schema"], SCHEMA);
    assert_eq!(values.iter().filter(|v| v["type"] == "record").count(), 752);
    assert_eq!(values.iter().filter(|v| v["type"] == "step").count(), 61);
    let report = check_trace(&bytes, &prob).unwrap();
    assert!(report.is_clean(), "{:?}", report.findings);
    assert_eq!(report.records_checked, 752);
    assert_eq!(report.iterations, 61);
    assert_eq!(report.status, "Converged");
}

#[test]
fn reserialized_trace_still_checks_clean() {
    let prob = example();
    let bytes = join(&lines(&trace_with(&prob, |_| {})));
    assert!(check_trace(&bytes, &prob).unwrap().is_clean());
}

#[test]
fn flipped_direction_is_caught_at_its_iteration() {
    let prob = example();
    let mut values = lines(&trace_with(&prob, |_| {}));
    let k = step_index(&values, 7);
    for row in values[k]["dX"].as_array_mut().unwrap() {
        for v in row.as_array_mut().unwrap() {
            *v = Value::from(-v.as_f64().unwrap());
        }
    }
    let report = check_trace(&join(&values), &prob).unwrap();
    assert!(report.has(FindingKind::ValueMismatch, Some("I10"), Some(7)));
    assert!(report.has(FindingKind::SnapshotInconsistent, None, Some(7)));
    assert!(!report.has(FindingKind::ValueMismatch, Some("I10"), Some(6)));
}

#[test]
fn deleted_record_is_missing() {
    let prob = example();
    let mut values = lines(&trace_with(&prob, |_| {}));
    values.remove(record_index(&values, "I4", 5));
    let report = check_trace(&join(&values), &prob).unwrap();
    assert!(report.has(FindingKind::MissingRecord, Some("I4"), Some(5)));
    assert_eq!(report.records_checked, 751);
}

#[test]
fn duplicated_and_foreign_records_are_flagged() {
    let prob = example();
    let mut values = lines(&trace_with(&prob, |_| {}));
    let i = record_index(&values, "I6", 3);
    let dup = values[i].clone();
    values.insert(i, dup);
    let mut foreign = values[i].clone();
    foreign["id"] = "I99".into();
    values.insert(i, foreign);
    let report = check_trace(&join(&values), &prob).unwrap();
    assert!(report.has(FindingKind::DuplicateRecord, Some("I6"), Some(3)));
    assert!(report.has(FindingKind::UnexpectedRecord, Some("I99"), Some(3)));
}

#[test]
fn flipped_verdict_is_flagged() {
    let prob = example();
    let mut values = lines(&trace_with(&prob, |_| {}));
    let i = record_index(&values, "I2", 2);
    values[i]["passed"] = true.into();
    let report = check_trace(&join(&values), &prob).unwrap();
    assert!(report.has(FindingKind::VerdictMismatch, Some("I2"), Some(2)));
}

#[test]
fn footer_tampering_is_flagged() {
    let prob = example();
    let mut values = lines(&trace_with(&prob, |_| {}));
    let last = values.len() - 1;
    values[last]["budget"]["bound_iterations"] = 60.into();
    let report = check_trace(&join(&values), &prob).unwrap();
    assert!(report.has(FindingKind::FooterMismatch, None, None));

    let mut values = lines(&trace_with(&prob, |_| {}));
    values[last]["iterations"] = 60.into();
    let report = check_trace(&join(&values), &prob).unwrap();
    assert!(report.has(FindingKind::FooterMismatch, None, None));
}

#[test]
fn wrong_problem_and_schema_are_errors() {
    let prob = example();
    let bytes = trace_with(&prob, |_| {});
    let other = random_feasible::<f64>(2, 1).unwrap();
    assert!(matches!(
        check_trace(&bytes, &other),
        Err(Error::HashMismatch { .. })
    ));

    let mut values = lines(&bytes);
    values[0]["schema"] = "cts-0".into();
    assert!(matches!(
        check_trace(&join(&values), &prob),
        Err(Error::SchemaMismatch { .. })
    ));
    assert!(matches!(
        check_trace(b"{not json", &prob),
        Err(Error::TraceParse { .. })
    ));
    assert!(check_trace(b"", &prob).is_err());
}

#[test]
fn truncated_trace_is_an_error() {
    let prob = example();
    let values = lines(&trace_with(&prob, |_| {}));
    assert!(check_trace(&join(&values[..values.len() - 1]), &prob).is_err());
}

#[test]
fn zero_iteration_trace_checks_clean() {
    let prob = example();
    let bytes = trace_with(&prob, |o| o.epsilon = 1.0);
    let report = check_trace(&bytes, &prob).unwrap();
    assert!(report.is_clean(), "{:?}", report.findings);
    assert_eq!(report.iterations, 0);
    assert_eq!(report.records_checked, 20);
}

#[test]
fn strict_abort_footer_is_consistent() {
    let prob = example();
    let bytes = trace_with(&prob, |o| o.mode = Mode::Strict);
    let mut values = lines(&bytes);
    let last = values.len() - 1;
    assert_eq!(values[last]["status"], "InvariantViolation");
    assert_eq!(values[last]["violation"]["id"], "init.gap_ceiling");
    assert!(check_trace(&bytes, &prob).unwrap().is_clean());

    values[last]["status"] = "Converged".into();
    values[last]["violation"] = Value::Null;
    let report = check_trace(&join(&values), &prob).unwrap();
    assert!(report.has(FindingKind::StatusInconsistent, None, None));
}

#[test]
fn iteration_cap_trace_checks_clean() {
    let prob = example();
    let bytes = trace_with(&prob, |o| o.max_iterations = Some(3));
    let report = check_trace(&bytes, &prob).unwrap();
    assert!(report.is_clean(), "{:?}", report.findings);
    assert_eq!(report.status, "IterationCap");
}

#[test]
fn single_precision_trace_checks_clean() {
    let prob = running_example::<f32>();
    let opts = SolverOptions::for_problem(&prob).unwrap();
    let report = solve(&prob, &opts, |_, _, _| {}).unwrap();
    let bytes = trace_bytes(&prob, &report);
    assert!(lines(&bytes)[0]["scalar"] == "f32");
    let check = check_trace(&bytes, &prob).unwrap();
    assert!(check.is_clean(), "{:?}", check.findings);
}

#[test]
fn random_problem_trace_checks_clean() {
    let prob = random_feasible::<f64>(3, 4).unwrap();
    let bytes = trace_with(&prob, |o| o.mode = Mode::Strict);
    let report = check_trace(&bytes, &prob).unwrap();
    assert!(report.is_clean(), "{:?}", report.findings);
    assert_eq!(report.status, "Converged");
}

#[derive(Debug, Clone)]
enum Target {
    Snapshot(&'static str, usize, usize),
    Vector(&'static str, usize),
    Scalar(&'static str),
    Record(&'static str, &'static str),
}

fn target() -> impl Strategy<Value = Target> {
    let ids = prop::sample::select(vec![
        "I1", "I2", "I3", "I4", "I5", "I6", "I7", "I8", "I9", "I10", "I11", "I12",
    ]);
    prop_oneof![
        (
            prop::sample::select(vec!["dX", "dZ", "X", "Z"]),
            0usize..2,
            0usize..2
        )
            .prop_map(|(k, i, j)| Target::Snapshot(k, i, j)),
        (prop::sample::select(vec!["dp", "p"]), 0usize..3).prop_map(|(k, i)| Target::Vector(k, i)),
        prop::sample::select(vec!["phi", "phim", "mu"]).prop_map(Target::Scalar),
        (
            ids,
            prop::sample::select(vec!["measured", "bound", "slack"])
        )
            .prop_map(|(id, f)| Target::Record(id, f)),
    ]
}

fn bump(v: &mut Value, delta: f64) {
    let x = v.as_f64().unwrap();
    *v = Value::from(x + delta * (x.abs() + 1e-6));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn any_numeric_mutation_is_detected(t in target(), it in 1u64..=61, delta in prop_oneof![1e-6f64..1.0, -1.0f64..-1e-6]) {
        let prob = example();
        let mut values = lines(&trace_with(&prob, |_| {}));
        let s = step_index(&values, it);
        match t {
            Target::Snapshot(k, i, j) => bump(&mut values[s][k][i][j], delta),
            Target::Vector(k, i) => bump(&mut values[s][k][i], delta),
            Target::Scalar(k) => bump(&mut values[s][k], delta),
            Target::Record(id, f) => {
                let r = record_index(&values, id, it);
                bump(&mut values[r][f], delta);
            }
        }
        let report = check_trace(&join(&values), &prob).unwrap();
        prop_assert!(!report.is_clean());
        prop_assert!(report.findings.iter().any(|f| f.iteration == Some(it as usize) || f.iteration == Some(it as usize + 1)));
    }
}
