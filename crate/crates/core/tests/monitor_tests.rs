use credible_sdp::monitor::catalog::{
    find, init_ids, loop_ids, INIT_CONTRACTS, LISTING_CLAUSES, LOOP_CONTRACTS,
};
use credible_sdp::monitor::{central_path_proximity, SCALED_DZ_BOUND};
use credible_sdp::{
    check_initialization, check_iteration, initialize, iteration_bound, running_example, solve,
    CheckKind, IterateState, NewtonStep, SdpProblem, SolverOptions, SymMatrix,
};
use proptest::prelude::*;

type Step = (IterateState<f64>, NewtonStep<f64>, IterateState<f64>);

fn example() -> (SdpProblem<f64>, SolverOptions<f64>) {
    let prob = running_example::<f64>();
    let opts = SolverOptions::for_problem(&prob).unwrap();
    (prob, opts)
}

fn steps(prob: &SdpProblem<f64>, opts: &SolverOptions<f64>) -> Vec<Step> {
    let mut out = Vec::new();
    solve(prob, opts, |a, s, b| {
        out.push((a.clone(), s.clone(), b.clone()))
    })
    .unwrap();
    out
}

#[test]
fn perturbed_iterate_fails_exact_contraction() {
    let (prob, opts) = example();
    let cfg = opts.monitor_config();
    let (prev, step, next) = steps(&prob, &opts).swap_remove(9);
    let clean = check_iteration(&prob, &prev, &step, &next, &cfg);
    assert!(clean.iter().find(|r| r.id == "I8").unwrap().passed);

    let mut bad = next.clone();
    bad.x = bad.x.add(&SymMatrix::identity(2).scale(1e-3));
    let recs = check_iteration(&prob, &prev, &step, &bad, &cfg);
    let i8 = recs.iter().find(|r| r.id == "I8").unwrap();
    assert!(!i8.passed);
    assert!(i8.slack < 0.0);
    assert_eq!(i8.iteration, 10);
}

#[test]
fn indefinite_f0_fails_its_record() {
    let (prob, opts) = example();
    let state = initialize(&prob, None, &opts).unwrap();
    let bad = prob
        .clone()
        .with_f0_unchecked(SymMatrix::identity(2).scale(-1.0))
        .unwrap();
    let recs = check_initialization(&bad, &state, &opts.monitor_config());
    let f0 = recs.iter().find(|r| r.id == "init.F0_pd").unwrap();
    assert!(!f0.passed);
    assert!((f0.measured + 1.0).abs() < 1e-14);
}

#[test]
fn records_follow_catalog_order() {
    let (prob, opts) = example();
    let report = solve(&prob, &opts, |_, _, _| {}).unwrap();
    let init: Vec<String> = report.init_records.iter().map(|r| r.id.clone()).collect();
    assert_eq!(init, init_ids(3));
    assert_eq!(init.len(), 20);
    for h in &report.history {
        let ids: Vec<String> = h.records.iter().map(|r| r.id.clone()).collect();
        assert_eq!(ids, loop_ids());
        assert!(h.records.iter().all(|r| r.iteration == h.iteration));
    }
    assert_eq!(report.records().count(), 20 + 61 * 12);
}

#[test]
fn gap_and_contraction_slack_behave_monotonically() {
    let (prob, opts) = example();
    let report = solve(&prob, &opts, |_, _, _| {}).unwrap();
    let mut prev_phi = report.initial.phi;
    for h in &report.history {
        assert!(h.state.phi < prev_phi);
        prev_phi = h.state.phi;
        let i3 = h.records.iter().find(|r| r.id == "I3").unwrap();
        // phi - 0.76 phim = (sigma - 0.76) phim, strictly negative
        assert!(i3.passed);
        assert!((i3.slack - (0.76 - 0.75) * h.state.phim).abs() < 1e-12 * h.state.phim.max(1e-300));
        let i5 = h.records.iter().find(|r| r.id == "I5").unwrap();
        assert!(i5.measured.abs() < 1e-12);
        assert!((i5.slack - SCALED_DZ_BOUND).abs() < 1e-12);
    }
}

#[test]
fn tanabe_potential_decreases() {
    let (prob, opts) = example();
    let report = solve(&prob, &opts, |_, _, _| {}).unwrap();
    let drop = report.min_potential_drop().unwrap();
    assert!(drop > 0.0);
    assert!((report.nu - 0.4714045207910317).abs() < 1e-12);
}

#[test]
fn proximity_is_zero_on_the_central_path() {
    let z = SymMatrix::<f64>::from_rows(&[[2.0, 0.5], [0.5, 1.0]]).unwrap();
    let zinv = credible_sdp::linalg::sym_inv(&z).unwrap();
    let mu = 0.3;
    assert!(central_path_proximity(&zinv.scale(mu), &z, mu) < 1e-14);
    let bad = SymMatrix::from_rows(&[[1.0, 0.0], [0.0, -1.0]]).unwrap();
    assert!(central_path_proximity(&zinv, &bad, mu).is_nan());
}

#[test]
fn catalog_lookup_and_mapping() {
    assert_eq!(find("init.F2_sym").unwrap().id, "init.F{i}_sym");
    assert!(find("init.F_sym").is_none());
    assert!(find("I13").is_none());
    for id in loop_ids() {
        assert_eq!(find(&id).unwrap().id, id);
    }
    // every listing clause maps to a known contract, every contract has a clause
    for c in LISTING_CLAUSES {
        assert!(
            INIT_CONTRACTS
                .iter()
                .chain(LOOP_CONTRACTS)
                .any(|s| s.id == c.contract),
            "{} maps to unknown {}",
            c.text,
            c.contract
        );
    }
    for s in INIT_CONTRACTS.iter().chain(LOOP_CONTRACTS) {
        assert!(
            LISTING_CLAUSES.iter().any(|c| c.contract == s.id),
            "{} unmapped",
            s.id
        );
    }
}

#[test]
fn record_kinds_serialize_in_snake_case() {
    let (prob, opts) = example();
    let report = solve(&prob, &opts, |_, _, _| {}).unwrap();
    let i11 = report.history[0]
        .records
        .iter()
        .find(|r| r.id == "I11")
        .unwrap();
    assert_eq!(i11.kind, CheckKind::Chain);
    let v = serde_json::to_value(i11).unwrap();
    assert_eq!(v["kind"], "chain");
    assert!(v["components"]["middle"].is_number());
}

// Oracle: count contractions directly.
fn count(g0: f64, eps: f64, sigma: f64) -> usize {
    let mut g = g0;
    let mut k = 0;
    while g > eps {
        g *= sigma;
        k += 1;
    }
    k
}

proptest! {
    #[test]
    fn iteration_bound_is_minimal(g0 in 1e-6f64..10.0, eps_exp in -10i32..-1, sigma in 0.05f64..0.99) {
        let eps = 10f64.powi(eps_exp);
        let k = iteration_bound(g0, eps, sigma).unwrap().bound_iterations;
        let direct = count(g0, eps, sigma);
        // The direct count can differ by one only where g0 sigma^k sits on eps.
        let edge = (g0 * sigma.powi(direct as i32 - 1) / eps - 1.0).abs() < 1e-8
            || (g0 * sigma.powi(direct as i32) / eps - 1.0).abs() < 1e-8;
        prop_assert!(k == direct || edge, "k {k} direct {direct}");
        if k > 0 {
            prop_assert!(g0 * sigma.powi(k as i32) <= eps * (1.0 + 1e-8));
            prop_assert!(g0 * sigma.powi(k as i32 - 1) > eps * (1.0 - 1e-8));
        }
    }
}

#[test]
fn exact_powers_are_not_rounded_up() {
    assert_eq!(iteration_bound(1.0, 0.25, 0.5).unwrap().bound_iterations, 2);
    assert_eq!(
        iteration_bound(1e-9, 1e-8, 0.5).unwrap().bound_iterations,
        0
    );
    assert!(iteration_bound(1.0, 0.0, 0.5).is_err());
    assert!(iteration_bound(1.0, 1e-8, 1.0).is_err());
}
