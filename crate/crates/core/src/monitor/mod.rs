//! Runtime evaluation of the loop invariants and initialization contracts.
//!
//! Every contract produces an [`InvariantRecord`] whether it holds or
//! not. Equalities are checked against `identity_tol` scaled by the size
//! of the operands; inequalities are compared exactly as stated.

pub mod catalog;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{min_eigenvalue, norm2, sym_sqrt_with_tol, Matrix};
use crate::problem::{duality_gap, primal_residual, SdpProblem};
use crate::scalar::Scalar;
use crate::solver::{IterateState, NewtonStep};
use crate::symvec::{packed_len, vecs, SymMatrix};

pub use catalog::{ClauseParams, ContractSpec, Phase, INIT_CONTRACTS, LOOP_CONTRACTS};

/// Radius of the central-path neighborhood, relative to `mu`.
pub const NEIGHBORHOOD_RADIUS: f64 = 0.3105;
/// Contraction ceiling used in `phi - 0.76*phim < 0`.
pub const CONTRACTION_CEILING: f64 = 0.76;
/// Bound on `‖Zhi·dZ·Zhi‖_F`.
pub const SCALED_DZ_BOUND: f64 = 0.7;

/// Comparison a record encodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckKind {
    /// `measured < bound`
    Less,
    /// `measured <= bound`
    LessEq,
    /// `measured > bound`
    Greater,
    /// `measured >= bound`
    GreaterEq,
    /// `|measured| <= bound`
    AbsLessEq,
    /// `0 < measured <= bound`
    PositiveAtMost,
    /// `lhs <= middle (+ chain_tol)` and `middle <= bound`, with
    /// `measured = middle`.
    Chain,
    /// `measured > 0` and `z_min_eig > pd_margin`.
    Implication,
}

/// Outcome of one contract evaluation. Values are stored as `f64`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvariantRecord {
    pub id: String,
    pub iteration: usize,
    pub kind: CheckKind,
    #[serde(with = "nan_as_null")]
    pub measured: f64,
    #[serde(with = "nan_as_null")]
    pub bound: f64,
    pub passed: bool,
    /// Positive when the contract holds.
    #[serde(with = "nan_as_null")]
    pub slack: f64,
    pub paper_anchor: String,
    #[serde(with = "nan_as_null::map")]
    pub components: BTreeMap<String, f64>,
}

impl InvariantRecord {
    pub fn new(
        id: impl Into<String>,
        iteration: usize,
        kind: CheckKind,
        measured: f64,
        bound: f64,
        components: &[(&str, f64)],
    ) -> Self {
        let id = id.into();
        let paper_anchor = catalog::find(&id).map_or("", |s| s.anchor).to_string();
        let components: BTreeMap<String, f64> = components
            .iter()
            .map(|(k, v)| (k.to_string(), *v))
            .collect();
        let (passed, slack) = evaluate(kind, measured, bound, &components);
        Self {
            id,
            iteration,
            kind,
            measured,
            bound,
            passed,
            slack,
            paper_anchor,
            components,
        }
    }
}

/// Pass flag and slack for a comparison. NaN operands fail.
pub fn evaluate(
    kind: CheckKind,
    measured: f64,
    bound: f64,
    components: &BTreeMap<String, f64>,
) -> (bool, f64) {
    let comp = |k: &str| components.get(k).copied().unwrap_or(f64::NAN);
    match kind {
        CheckKind::Less => (measured < bound, bound - measured),
        CheckKind::LessEq => (measured <= bound, bound - measured),
        CheckKind::Greater => (measured > bound, measured - bound),
        CheckKind::GreaterEq => (measured >= bound, measured - bound),
        CheckKind::AbsLessEq => (measured.abs() <= bound, bound - measured.abs()),
        CheckKind::PositiveAtMost => (
            measured > 0.0 && measured <= bound,
            (bound - measured).min(measured),
        ),
        CheckKind::Chain => {
            let link = comp("middle") + comp("chain_tol") - comp("lhs");
            (
                link >= 0.0 && measured <= bound,
                (bound - measured).min(link),
            )
        }
        CheckKind::Implication => {
            let z = comp("z_min_eig") - comp("pd_margin");
            (measured > 0.0 && z > 0.0, measured.min(z))
        }
    }
}

/// Constants the monitor evaluates against.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonitorConfig<T> {
    pub sigma: T,
    pub gap_ceiling: T,
    pub identity_tol: T,
    pub pd_margin: T,
    pub epsilon: T,
}

impl<T: Scalar> MonitorConfig<T> {
    fn eq_bound(&self, scale: T) -> f64 {
        (self.identity_tol * scale.abs().max(T::one())).as_f64()
    }

    pub fn clause_params(&self) -> ClauseParams {
        ClauseParams {
            gap_ceiling: self.gap_ceiling.as_f64(),
            sigma: self.sigma.as_f64(),
        }
    }
}

/// Geometric iteration budget implied by the exact per-step contraction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceBudget<T> {
    pub initial_gap: T,
    pub epsilon: T,
    pub sigma: T,
    pub bound_iterations: usize,
}

/// `⌈log(gap/epsilon) / log(1/sigma)⌉`, or 0 when `gap <= epsilon`.
///
/// A quotient within `1e-9` relative of an integer is taken as that
/// integer so exact powers of `1/sigma` are not rounded up.
pub fn iteration_bound<T: Scalar>(
    initial_gap: T,
    epsilon: T,
    sigma: T,
) -> Result<ConvergenceBudget<T>> {
    if !(epsilon > T::zero()) {
        return Err(Error::InvalidOption(format!(
            "epsilon must be positive, got {epsilon}"
        )));
    }
    if !(sigma > T::zero() && sigma < T::one()) {
        return Err(Error::InvalidOption(format!(
            "sigma must lie in (0, 1), got {sigma}"
        )));
    }
    if !initial_gap.is_finite() {
        return Err(Error::NonFinite("initial gap".into()));
    }
    let bound_iterations = if initial_gap <= epsilon {
        0
    } else {
        let x = (initial_gap.as_f64() / epsilon.as_f64()).ln() / (1.0 / sigma.as_f64()).ln();
        let r = x.round();
        if (x - r).abs() <= 1e-9 * x.max(1.0) {
            r as usize
        } else {
            x.ceil() as usize
        }
    };
    Ok(ConvergenceBudget {
        initial_gap,
        epsilon,
        sigma,
        bound_iterations,
    })
}

/// `‖Z^{1/2} X Z^{1/2} − mu I‖_F`; NaN when `Z` is not positive definite.
pub fn central_path_proximity<T: Scalar>(x: &SymMatrix<T>, z: &SymMatrix<T>, mu: T) -> T {
    match sym_sqrt_with_tol(z, T::zero()) {
        Ok(zh) => {
            let s = zh.as_matrix() * &(x.as_matrix() * zh.as_matrix());
            (&s - &Matrix::identity(x.n()).scale(mu)).frobenius()
        }
        Err(_) => T::nan(),
    }
}

/// `‖X Z − mu I‖_F`.
pub fn central_path_proximity_unscaled<T: Scalar>(x: &SymMatrix<T>, z: &SymMatrix<T>, mu: T) -> T {
    let xz = x.as_matrix() * z.as_matrix();
    (&xz - &Matrix::identity(x.n()).scale(mu)).frobenius()
}

fn f(v: impl Scalar) -> f64 {
    v.as_f64()
}

/// One record per initialization contract, in catalog order.
pub fn check_initialization<T: Scalar>(
    prob: &SdpProblem<T>,
    state: &IterateState<T>,
    cfg: &MonitorConfig<T>,
) -> Vec<InvariantRecord> {
    use CheckKind::*;
    let n = prob.n();
    let m = prob.m();
    let x = &state.x;
    let z = &state.z;
    let gap = duality_gap(x, z);
    let pd = f(cfg.pd_margin);
    let mut out = Vec::with_capacity(catalog::init_ids(m).len());

    for spec in INIT_CONTRACTS {
        let rec = |kind, measured, bound, comps: &[(&str, f64)]| {
            InvariantRecord::new(spec.id, 0, kind, measured, bound, comps)
        };
        match spec.id {
            "init.F0_pd" => out.push(rec(Greater, f(min_eigenvalue(prob.f0())), pd, &[])),
            "init.F{i}_sym" => {
                for (i, fi) in prob.constraints().iter().enumerate() {
                    let a = fi.as_matrix();
                    let asym = (a - &a.transpose()).max_abs();
                    out.push(InvariantRecord::new(
                        spec.expand_id(i + 1),
                        0,
                        AbsLessEq,
                        f(asym),
                        cfg.eq_bound(a.max_abs()),
                        &[],
                    ));
                }
            }
            "init.b_size" => out.push(rec(AbsLessEq, prob.b().len() as f64 - m as f64, 0.0, &[])),
            "init.n" => out.push(rec(GreaterEq, n as f64, 1.0, &[])),
            "init.m" => out.push(rec(GreaterEq, m as f64, 1.0, &[])),
            "init.dual_feasible" => {
                let fz = prob
                    .fmat()
                    .matvec(vecs(z).as_slice())
                    .expect("dimensions checked");
                let res: Vec<T> = fz.iter().zip(prob.b()).map(|(&a, &b)| a + b).collect();
                out.push(rec(
                    AbsLessEq,
                    f(norm2(&res)),
                    cfg.eq_bound(norm2(prob.b())),
                    &[],
                ));
            }
            "init.Z_pd" => out.push(rec(Greater, f(min_eigenvalue(z)), pd, &[])),
            "init.X_pd" => out.push(rec(Greater, f(min_eigenvalue(x)), pd, &[])),
            "init.epsilon" => out.push(rec(Greater, f(cfg.epsilon), 0.0, &[])),
            "init.sigma" => out.push(rec(Less, f(cfg.sigma), 1.0, &[("sigma", f(cfg.sigma))])),
            "init.gap_positive" => out.push(rec(Greater, f(gap), 0.0, &[])),
            "init.gap_ceiling" => out.push(rec(LessEq, f(gap), f(cfg.gap_ceiling), &[])),
            "init.phi" => out.push(rec(AbsLessEq, f(state.phi - gap), cfg.eq_bound(gap), &[])),
            "init.phim" => out.push(rec(
                Less,
                f(state.phi - T::lit(CONTRACTION_CEILING) * state.phim),
                0.0,
                &[("phi", f(state.phi)), ("phim", f(state.phim))],
            )),
            "init.P_sym" => {
                // P = mats(p) only typechecks when m == n(n+1)/2.
                let applicable = m == packed_len(n);
                let asym = if applicable {
                    let mut pm = Matrix::zeros(n, n);
                    let mut k = 0;
                    for i in 0..n {
                        for j in i..n {
                            pm[(i, j)] = state.p[k];
                            pm[(j, i)] = state.p[k];
                            k += 1;
                        }
                    }
                    (&pm - &pm.transpose()).max_abs()
                } else {
                    T::zero()
                };
                out.push(rec(
                    AbsLessEq,
                    f(asym),
                    0.0,
                    &[("applicable", if applicable { 1.0 } else { 0.0 })],
                ));
            }
            "init.primal_feasible" => {
                let res = primal_residual(prob, x, &state.p).expect("dimensions checked");
                let scale = prob.f0().as_matrix().frobenius() + x.as_matrix().frobenius();
                out.push(rec(
                    AbsLessEq,
                    f(res.as_matrix().frobenius()),
                    cfg.eq_bound(scale),
                    &[],
                ));
            }
            "init.mu" => out.push(rec(
                AbsLessEq,
                f(T::from_count(n) * state.mu - gap),
                cfg.eq_bound(gap),
                &[],
            )),
            "init.central_path" => out.push(rec(
                LessEq,
                f(central_path_proximity(x, z, state.mu)),
                f(T::lit(NEIGHBORHOOD_RADIUS) * state.mu),
                &[
                    ("mu", f(state.mu)),
                    (
                        "xz_form",
                        f(central_path_proximity_unscaled(x, z, state.mu)),
                    ),
                ],
            )),
            other => unreachable!("initialization contract {other} has no evaluator"),
        }
    }
    out
}

/// The twelve loop invariants for one iteration, in catalog order.
///
/// `prev` is the iterate the step was computed from; `next` is the
/// iterate after the update.
pub fn check_iteration<T: Scalar>(
    prob: &SdpProblem<T>,
    prev: &IterateState<T>,
    step: &NewtonStep<T>,
    next: &IterateState<T>,
    cfg: &MonitorConfig<T>,
) -> Vec<InvariantRecord> {
    use CheckKind::*;
    let n = prob.n();
    let it = next.iteration;
    let sigma = cfg.sigma;
    let mu = step.mu;
    let nt = T::from_count(n);
    let eye = Matrix::<T>::identity(n);
    let (xm, zm) = (prev.x.as_matrix(), prev.z.as_matrix());
    let (x, z) = (next.x.as_matrix(), next.z.as_matrix());
    let (dx, dz) = (step.dx.as_matrix(), step.dz.as_matrix());
    let (zh, zhi) = (step.zh.as_matrix(), step.zhi.as_matrix());
    let smu = sigma * mu;
    let radius = T::lit(NEIGHBORHOOD_RADIUS);
    let pd = f(cfg.pd_margin);
    let gap_m = duality_gap(&prev.x, &prev.z);
    let gap = duality_gap(&next.x, &next.z);
    let x_min = f(min_eigenvalue(&next.x));
    let z_min = f(min_eigenvalue(&next.z));
    let rec = |id: &str, kind, measured, bound, comps: &[(&str, f64)]| {
        InvariantRecord::new(id, it, kind, measured, bound, comps)
    };

    let mut out = Vec::with_capacity(LOOP_CONTRACTS.len());
    out.push(rec(
        "I1",
        Greater,
        x_min.min(z_min),
        pd,
        &[("x_min_eig", x_min), ("z_min_eig", z_min)],
    ));
    out.push(rec("I2", PositiveAtMost, f(gap), f(cfg.gap_ceiling), &[]));
    out.push(rec(
        "I3",
        Less,
        f(gap - T::lit(CONTRACTION_CEILING) * next.phim),
        0.0,
        &[("phi", f(gap)), ("phim", f(next.phim))],
    ));
    out.push(rec(
        "I4",
        LessEq,
        f(central_path_proximity(&next.x, &next.z, next.mu)),
        f(radius * next.mu),
        &[
            ("mu", f(next.mu)),
            (
                "xz_form",
                f(central_path_proximity_unscaled(&next.x, &next.z, next.mu)),
            ),
        ],
    ));
    let scaled_dz = zhi * &(dz * zhi);
    out.push(rec(
        "I5",
        LessEq,
        f(scaled_dz.frobenius()),
        SCALED_DZ_BOUND,
        &[],
    ));
    out.push(rec(
        "I6",
        LessEq,
        f((zhi * &(dx * &(dz * zh))).frobenius()),
        f(radius * smu),
        &[],
    ));
    let lin = (xm * dz).trace() + (dx * zm).trace() + gap_m - sigma * nt * mu;
    out.push(rec(
        "I7",
        AbsLessEq,
        f(lin),
        cfg.eq_bound(sigma * nt * mu),
        &[],
    ));
    out.push(rec(
        "I8",
        AbsLessEq,
        f(gap - sigma * gap_m),
        cfg.eq_bound(gap_m),
        &[],
    ));

    let dual = norm2(
        &prob
            .fmat()
            .matvec(vecs(&step.dz).as_slice())
            .expect("dimensions checked"),
    );
    let primal = prob
        .combine(&step.dp)
        .map(|c| (c.as_matrix() + dx).frobenius())
        .unwrap_or_else(|_| T::nan());
    out.push(rec(
        "I9",
        AbsLessEq,
        f(dual.max(primal)),
        cfg.eq_bound(dx.frobenius()),
        &[("dual", f(dual)), ("primal", f(primal))],
    ));

    let half = T::lit(0.5);
    let left = zhi * &(&(&(dz * xm) + &(zm * dx)) * zh);
    let right = zh * &(&(&(xm * dz) + &(dx * zm)) * zhi);
    let sym = (&left + &right).scale(half);
    let r = &eye.scale(smu) - &(zh * &(xm * zh));
    out.push(rec(
        "I10",
        AbsLessEq,
        f((&sym - &r).frobenius()),
        cfg.eq_bound(r.frobenius()),
        &[],
    ));

    let lhs = (&(zh * &(x * zh)) - &eye.scale(smu)).frobenius();
    let xz = &(x * z) - &eye.scale(smu);
    let zx = &(z * x) - &eye.scale(smu);
    let middle = (&(zh * &(&xz * zhi)) + &(zhi * &(&zx * zh))).frobenius() * half;
    out.push(rec(
        "I11",
        Chain,
        f(middle),
        f(radius * smu),
        &[
            ("lhs", f(lhs)),
            ("middle", f(middle)),
            ("chain_tol", cfg.eq_bound(middle)),
        ],
    ));

    let cert = min_eigenvalue(&SymMatrix::symmetrize(&(&eye + &scaled_dz)));
    out.push(rec(
        "I12",
        Implication,
        f(cert),
        0.0,
        &[("z_min_eig", z_min), ("pd_margin", pd)],
    ));
    out
}

/// Serde adapters writing non-finite floats as `null` and reading `null`
/// back as NaN.
pub mod nan_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
    }

    pub mod map {
        use std::collections::BTreeMap;

        use serde::ser::SerializeMap;
        use serde::{Deserialize, Deserializer, Serializer};

        pub fn serialize<S: Serializer>(
            m: &BTreeMap<String, f64>,
            s: S,
        ) -> Result<S::Ok, S::Error> {
            let mut map = s.serialize_map(Some(m.len()))?;
            for (k, v) in m {
                map.serialize_entry(k, &v.is_finite().then_some(*v))?;
            }
            map.end()
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(
            d: D,
        ) -> Result<BTreeMap<String, f64>, D::Error> {
            let raw = BTreeMap::<String, Option<f64>>::deserialize(d)?;
            Ok(raw
                .into_iter()
                .map(|(k, v)| (k, v.unwrap_or(f64::NAN)))
                .collect())
        }
    }
}
