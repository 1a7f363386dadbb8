use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_credible-sdp");

fn example_path() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/data/running_example.json")
}

fn golden() -> String {
    fs::read_to_string(
        Path::new(env!("CARGO_MANIFEST_DIR"))
            .join("../core/tests/fixtures/running_example.listing.m"),
    )
    .unwrap()
}

fn run(args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .env_remove("CREDIBLE_SDP_TOL")
        .output()
        .unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn solve_writes_trace_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("t.jsonl");
    let out = run(&[
        "solve",
        "--problem",
        p(&example_path()),
        "--trace",
        p(&trace),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    assert!(text.contains("Converged"), "{text}");
    assert!(text.contains("61"), "{text}");
    let lines = fs::read_to_string(&trace).unwrap().lines().count();
    assert_eq!(lines, 1 + 1 + 20 + 61 * 13 + 1);

    let check = run(&[
        "check-trace",
        "--trace",
        p(&trace),
        "--problem",
        p(&example_path()),
    ]);
    assert_eq!(code(&check), 0, "{}", stdout(&check));
}

#[test]
fn strict_mode_reports_violation() {
    let out = run(&["solve", "--problem", p(&example_path()), "--mode", "strict"]);
    assert_eq!(code(&out), 2);
    assert!(stdout(&out).contains("init.gap_ceiling"));
    let out = run(&[
        "solve",
        "--problem",
        p(&example_path()),
        "--mode",
        "strict",
        "--gap-ceiling",
        "0.32",
    ]);
    assert_eq!(code(&out), 0);
}

#[test]
fn iteration_cap_exits_four() {
    let out = run(&[
        "solve",
        "--problem",
        p(&example_path()),
        "--max-iterations",
        "3",
    ]);
    assert_eq!(code(&out), 4);
}

#[test]
fn loose_epsilon_converges_immediately() {
    let out = run(&["solve", "--problem", p(&example_path()), "--epsilon", "1.0"]);
    assert_eq!(code(&out), 0);
}

#[test]
fn bad_inputs_exit_one() {
    assert_eq!(
        code(&run(&["solve", "--problem", "/nonexistent/problem.json"])),
        1
    );
    assert_eq!(
        code(&run(&[
            "annotate",
            "--problem",
            p(&example_path()),
            "--flavor",
            "latex"
        ])),
        1
    );
    assert_eq!(
        code(&run(&[
            "solve",
            "--problem",
            p(&example_path()),
            "--sigma",
            "1.5"
        ])),
        1
    );
    assert_eq!(code(&run(&["frobnicate"])), 1);
    assert_eq!(code(&run(&["--help"])), 0);
    assert_eq!(code(&run(&["--version"])), 0);

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(&bad, "{\"n\": 2}").unwrap();
    assert_eq!(code(&run(&["solve", "--problem", p(&bad)])), 1);
}

#[test]
fn annotate_matches_golden_file() {
    let out = run(&["annotate", "--problem", p(&example_path())]);
    assert_eq!(code(&out), 0);
    assert_eq!(stdout(&out), golden());

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("l.c");
    let out = run(&[
        "annotate",
        "--problem",
        p(&example_path()),
        "--flavor",
        "c-like",
        "--listing",
        p(&path),
    ]);
    assert_eq!(code(&out), 0);
    let text = fs::read_to_string(&path).unwrap();
    assert!(text.contains("/*@ ensures F0>0; */"));
}

#[test]
fn check_trace_flags_tampering_and_wrong_problem() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("t.jsonl");
    assert_eq!(
        code(&run(&[
            "solve",
            "--problem",
            p(&example_path()),
            "--trace",
            p(&trace)
        ])),
        0
    );

    let mut values: Vec<Value> = fs::read_to_string(&trace)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    let k = values
        .iter()
        .position(|v| v["type"] == "step" && v["iteration"] == 4)
        .unwrap();
    let x = values[k]["dX"][0][0].as_f64().unwrap();
    values[k]["dX"][0][0] = Value::from(-x);
    let tampered = dir.path().join("bad.jsonl");
    let body: String = values.iter().map(|v| format!("{v}\n")).collect();
    fs::write(&tampered, body).unwrap();
    let out = run(&[
        "check-trace",
        "--trace",
        p(&tampered),
        "--problem",
        p(&example_path()),
    ]);
    assert_eq!(code(&out), 2);
    assert!(stdout(&out).contains("iteration 4"), "{}", stdout(&out));

    let other = dir.path().join("other.json");
    assert_eq!(
        code(&run(&[
            "random",
            "--n",
            "2",
            "--seed",
            "3",
            "--out",
            p(&other)
        ])),
        0
    );
    let out = run(&["check-trace", "--trace", p(&trace), "--problem", p(&other)]);
    assert_eq!(code(&out), 1);
}

#[test]
fn demo_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["demo", "--out-dir", p(dir.path())]);
    // The bundled data violates the 0.1 gap ceiling on early iterations.
    assert_eq!(code(&out), 2);
    for f in ["problem.json", "trace.jsonl", "listing.m"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    assert_eq!(
        fs::read_to_string(dir.path().join("listing.m")).unwrap(),
        golden()
    );
    let check = run(&[
        "check-trace",
        "--trace",
        p(&dir.path().join("trace.jsonl")),
        "--problem",
        p(&dir.path().join("problem.json")),
    ]);
    assert_eq!(code(&check), 0);

    assert_eq!(code(&run(&["demo", "--gap-ceiling", "0.32"])), 0);
    assert_eq!(code(&run(&["demo", "--mode", "strict"])), 2);
}

#[test]
fn demo_with_other_parameters() {
    // sigma 0.95 exceeds the 0.76 contraction ceiling, but the trace still checks clean
    let out = run(&["demo", "--sigma", "0.95", "--gap-ceiling", "0.32"]);
    assert_eq!(code(&out), 2);
    let text = stdout(&out);
    assert!(text.contains("I3"), "{text}");

    let out = run(&["demo", "--epsilon", "1e-2", "--gap-ceiling", "0.32"]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).contains("13"));
}

#[test]
fn tolerance_comes_from_environment() {
    let out = Command::new(BIN)
        .args([
            "solve",
            "--problem",
            p(&example_path()),
            "--gap-ceiling",
            "0.32",
            "--mode",
            "strict",
        ])
        .env("CREDIBLE_SDP_TOL", "1e-30")
        .output()
        .unwrap();
    assert_eq!(code(&out), 2, "{}", stdout(&out));

    let out = Command::new(BIN)
        .args(["solve", "--problem", p(&example_path())])
        .env("CREDIBLE_SDP_TOL", "abc")
        .output()
        .unwrap();
    assert_eq!(code(&out), 1);
}

#[test]
fn random_problem_round_trips_through_solve() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.json");
    assert_eq!(
        code(&run(&[
            "random",
            "--n",
            "3",
            "--seed",
            "4",
            "--out",
            p(&path)
        ])),
        0
    );
    let out = run(&["solve", "--problem", p(&path), "--mode", "strict"]);
    assert_eq!(code(&out), 0, "{}", stdout(&out));
    assert_eq!(code(&run(&["random", "--n", "0"])), 1);
}
