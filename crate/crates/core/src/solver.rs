//! Short-step primal-dual interior-point loop with the Monteiro-Zhang
//! symmetrization `T = Z^{-1/2}` and a fixed step length of one.
//!
//! Each iteration works on the previous iterate `(Xm, Zm, pm)`:
//!
//! ```text
//! mu  = Tr(Xm Zm) / n
//! Zh  = Zm^{1/2},  Zhi = Zh^{-1}
//! G   = krons(Zhi, Zh·Xm),  H = krons(Zhi·Zm, Zh)
//! r   = sigma·mu·I − Zh·Xm·Zh
//! dZ  = lsqr(Fmat, 0)
//! dX  = lsqr(H, vecs(r) − G·vecs(dZ))
//! dp  = lsqr(Fmatᵀ, −vecs(dX))
//! ```
//!
//! The three solves run in sequence; the coupled Newton system is never
//! formed as a whole. With the minimum-norm least-squares contract `dZ`
//! is exactly zero.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, is_pd, lsqr_solve, sym_inv_with_tol, sym_sqrt_with_tol, Matrix};
use crate::monitor::{
    self, check_initialization, check_iteration, iteration_bound, ConvergenceBudget,
    InvariantRecord, MonitorConfig,
};
use crate::problem::{duality_gap, potential_loggap, potential_tanabe, SdpProblem};
use crate::scalar::Scalar;
use crate::symvec::{krons, mats, vecs, SymMatrix};

/// Gap reduction factor hardcoded by the reference program.
pub const DEFAULT_SIGMA: f64 = 0.75;
pub const DEFAULT_EPSILON: f64 = 1e-8;
pub const DEFAULT_GAP_CEILING: f64 = 0.1;
pub const DEFAULT_IDENTITY_TOL: f64 = 1e-9;

/// How invariant failures are handled during a solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Abort on the first failing contract.
    Strict,
    /// Record failures and keep iterating.
    #[default]
    Audit,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances<T> {
    /// lsqr residual bound, scaled by `max(1, ‖b‖)`.
    pub lsqr_consistency: T,
    /// Absolute margin on the smallest eigenvalue for `≻ 0`.
    pub pd_margin: T,
    /// Tolerance on equality contracts, scaled by operand size.
    pub identity_check: T,
}

impl<T: Scalar> Default for Tolerances<T> {
    fn default() -> Self {
        Self {
            lsqr_consistency: T::tol_floor(linalg::DEFAULT_LSQR_TOL),
            pd_margin: T::tol_floor(linalg::DEFAULT_PD_TOL),
            identity_check: T::tol_floor(DEFAULT_IDENTITY_TOL),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions<T> {
    /// Target duality gap; the loop runs while `Tr(XZ) > epsilon`.
    pub epsilon: T,
    /// Gap reduction factor in `(0, 1)`.
    pub sigma: T,
    /// Weight `nu` when sigma was derived from it; used for the potential.
    pub nu: Option<T>,
    /// Hard cap; defaults to ten times the geometric iteration bound.
    pub max_iterations: Option<usize>,
    /// Upper bound `c` in the invariant `0 < Tr(XZ) <= c`.
    pub gap_ceiling: T,
    pub mode: Mode,
    pub tolerances: Tolerances<T>,
}

impl<T: Scalar> Default for SolverOptions<T> {
    fn default() -> Self {
        Self {
            epsilon: T::lit(DEFAULT_EPSILON),
            sigma: T::lit(DEFAULT_SIGMA),
            nu: None,
            max_iterations: None,
            gap_ceiling: T::lit(DEFAULT_GAP_CEILING),
            mode: Mode::Audit,
            tolerances: Tolerances::default(),
        }
    }
}

impl<T: Scalar> SolverOptions<T> {
    /// Defaults, overridden by `epsilon` and `nu` from the problem file.
    /// When `nu` is present sigma is derived from it.
    pub fn for_problem(prob: &SdpProblem<T>) -> Result<Self> {
        let mut opts = Self::default();
        if let Some(eps) = prob.epsilon() {
            opts.epsilon = eps;
        }
        if let Some(nu) = prob.nu() {
            opts.sigma = sigma_from_nu(prob.n(), nu)?;
            opts.nu = Some(nu);
        }
        Ok(opts)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: T, what: &str| {
            if v > T::zero() && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidOption(format!(
                    "{what} must be positive, got {v}"
                )))
            }
        };
        positive(self.epsilon, "epsilon")?;
        positive(self.gap_ceiling, "gap ceiling")?;
        positive(self.tolerances.lsqr_consistency, "lsqr tolerance")?;
        positive(self.tolerances.identity_check, "identity tolerance")?;
        if !(self.tolerances.pd_margin >= T::zero()) {
            return Err(Error::InvalidOption(
                "pd margin must be non-negative".into(),
            ));
        }
        if !(self.sigma > T::zero() && self.sigma < T::one()) {
            return Err(Error::InvalidOption(format!(
                "sigma must lie in (0, 1), got {}",
                self.sigma
            )));
        }
        if let Some(nu) = self.nu {
            positive(nu, "nu")?;
        }
        Ok(())
    }

    /// `nu` as given, or the value implied by sigma.
    pub fn effective_nu(&self, n: usize) -> T {
        self.nu.unwrap_or_else(|| nu_from_sigma(n, self.sigma))
    }

    pub fn monitor_config(&self) -> MonitorConfig<T> {
        MonitorConfig {
            sigma: self.sigma,
            gap_ceiling: self.gap_ceiling,
            identity_tol: self.tolerances.identity_check,
            pd_margin: self.tolerances.pd_margin,
            epsilon: self.epsilon,
        }
    }
}

/// `sigma = n / (n + nu·√n)`.
pub fn sigma_from_nu<T: Scalar>(n: usize, nu: T) -> Result<T> {
    if n == 0 {
        return Err(Error::InvalidOption("n must be at least 1".into()));
    }
    if !(nu > T::zero()) || !nu.is_finite() {
        return Err(Error::InvalidOption(format!(
            "nu must be positive, got {nu}"
        )));
    }
    let n = T::from_count(n);
    Ok(n / (n + nu * n.sqrt()))
}

/// Inverse of [`sigma_from_nu`].
pub fn nu_from_sigma<T: Scalar>(n: usize, sigma: T) -> T {
    let n = T::from_count(n);
    n * (T::one() - sigma) / (sigma * n.sqrt())
}

/// Solver state after an update, together with the iterate it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct IterateState<T> {
    pub x: SymMatrix<T>,
    pub z: SymMatrix<T>,
    pub p: Vec<T>,
    pub xm: SymMatrix<T>,
    pub zm: SymMatrix<T>,
    pub pm: Vec<T>,
    /// `Tr(XZ) / n`.
    pub mu: T,
    /// `Tr(XZ)`.
    pub phi: T,
    /// `Tr(Xm Zm)`, or `phi / sigma` right after initialization.
    pub phim: T,
    pub iteration: usize,
}

impl<T: Scalar> IterateState<T> {
    pub fn n(&self) -> usize {
        self.x.n()
    }
}

/// Search directions plus the pieces of the linear systems that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct NewtonStep<T> {
    pub dx: SymMatrix<T>,
    pub dz: SymMatrix<T>,
    pub dp: Vec<T>,
    pub g: Matrix<T>,
    pub h: Matrix<T>,
    pub r: SymMatrix<T>,
    /// `Zm^{1/2}`.
    pub zh: SymMatrix<T>,
    /// `Zm^{-1/2}`.
    pub zhi: SymMatrix<T>,
    /// `Tr(Xm Zm) / n` at assembly time.
    pub mu: T,
    pub sigma: T,
}

impl<T: Scalar> NewtonStep<T> {
    /// Rebuilds a step from stored directions, recomputing the scaling
    /// matrices and system pieces from the previous iterate.
    pub fn from_directions(
        prob: &SdpProblem<T>,
        prev: &IterateState<T>,
        sigma: T,
        pd_margin: T,
        dx: SymMatrix<T>,
        dz: SymMatrix<T>,
        dp: Vec<T>,
    ) -> Result<Self> {
        let mut step = assemble_newton(prob, prev, sigma, pd_margin)?;
        step.dx = dx;
        step.dz = dz;
        step.dp = dp;
        Ok(step)
    }
}

/// Computes `(X0, Z0, p0)` and the derived scalars.
///
/// Fails when X0 or Z0 is not positive definite, when either feasibility
/// system is inconsistent, or when X0 lies outside the central-path
/// neighborhood.
pub fn initialize<T: Scalar>(
    prob: &SdpProblem<T>,
    x0: Option<&SymMatrix<T>>,
    opts: &SolverOptions<T>,
) -> Result<IterateState<T>> {
    opts.validate()?;
    let n = prob.n();
    let x = x0
        .or_else(|| prob.x0())
        .cloned()
        .ok_or(Error::MissingInitialPoint)?;
    if x.n() != n {
        return Err(Error::Dimension {
            context: "initialize: dim(X0)",
            expected: n,
            found: x.n(),
        });
    }
    let tol = &opts.tolerances;
    if let Err(f) = is_pd(&x, tol.pd_margin) {
        return Err(Error::NotPositiveDefinite {
            context: "X0".into(),
            min_eigenvalue: f.min_eigenvalue.as_f64(),
        });
    }

    let neg_b: Vec<T> = prob.b().iter().map(|&v| -v).collect();
    let zsol = lsqr_solve(
        prob.fmat(),
        &neg_b,
        tol.lsqr_consistency,
        "dual feasibility <F_i, Z> = -b_i",
    )?;
    let z = mats(&zsol.x, n)?;
    if let Err(f) = is_pd(&z, tol.pd_margin) {
        return Err(Error::NotPositiveDefinite {
            context: "Z0 from dual feasibility solve".into(),
            min_eigenvalue: f.min_eigenvalue.as_f64(),
        });
    }

    let rhs = vecs(&x.add(prob.f0()).scale(-T::one()));
    let psol = lsqr_solve(
        &prob.fmat().transpose(),
        rhs.as_slice(),
        tol.lsqr_consistency,
        "primal feasibility sum p_i F_i = -X0 - F0",
    )?;
    let p = psol.x;

    let phi = duality_gap(&x, &z);
    let mu = phi / T::from_count(n);
    let radius = T::lit(monitor::NEIGHBORHOOD_RADIUS);
    let proximity = monitor::central_path_proximity(&x, &z, mu);
    if !(proximity <= radius * mu) {
        return Err(Error::Neighborhood {
            measured: proximity.as_f64(),
            bound: (radius * mu).as_f64(),
        });
    }

    Ok(IterateState {
        xm: x.clone(),
        zm: z.clone(),
        pm: p.clone(),
        x,
        z,
        p,
        mu,
        phi,
        phim: phi / opts.sigma,
        iteration: 0,
    })
}

/// Builds `G`, `H`, `r` and the scaling matrices from the current iterate.
pub fn assemble_newton<T: Scalar>(
    prob: &SdpProblem<T>,
    state: &IterateState<T>,
    sigma: T,
    pd_margin: T,
) -> Result<NewtonStep<T>> {
    let n = prob.n();
    let xm = &state.x;
    let zm = &state.z;
    let mu = duality_gap(xm, zm) / T::from_count(n);
    let zh = sym_sqrt_with_tol(zm, pd_margin)?;
    let zhi = sym_inv_with_tol(&zh, T::zero())?;
    let zh_t = zh.as_matrix().transpose();

    let g = krons(zhi.as_matrix(), &(&zh_t * xm.as_matrix()))?;
    let h = krons(&(zhi.as_matrix() * zm.as_matrix()), &zh_t)?;
    let scaled = zh.as_matrix() * &(xm.as_matrix() * zh.as_matrix());
    let r = SymMatrix::symmetrize(&(&Matrix::identity(n).scale(sigma * mu) - &scaled));

    Ok(NewtonStep {
        dx: SymMatrix::zeros(n),
        dz: SymMatrix::zeros(n),
        dp: vec![T::zero(); prob.m()],
        g,
        h,
        r,
        zh,
        zhi,
        mu,
        sigma,
    })
}

/// Runs the three sequential least-squares solves.
pub fn solve_newton<T: Scalar>(
    prob: &SdpProblem<T>,
    mut step: NewtonStep<T>,
    lsqr_tol: T,
) -> Result<NewtonStep<T>> {
    let n = prob.n();
    let zeros = vec![T::zero(); prob.m()];
    let dz = lsqr_solve(prob.fmat(), &zeros, lsqr_tol, "<F_i, dZ> = 0")?.x;

    let g_dz = step.g.matvec(&dz)?;
    let rhs: Vec<T> = vecs(&step.r)
        .as_slice()
        .iter()
        .zip(&g_dz)
        .map(|(&a, &b)| a - b)
        .collect();
    let dx = lsqr_solve(&step.h, &rhs, lsqr_tol, "symmetrized complementarity")?.x;

    let neg_dx: Vec<T> = dx.iter().map(|&v| -v).collect();
    let dp = lsqr_solve(
        &prob.fmat().transpose(),
        &neg_dx,
        lsqr_tol,
        "sum dp_i F_i + dX = 0",
    )?
    .x;

    step.dz = mats(&dz, n)?;
    step.dx = mats(&dx, n)?;
    step.dp = dp;
    Ok(step)
}

/// Full step: `X = Xm + dX`, `Z = Zm + dZ`, `p = pm + dp`.
pub fn take_step<T: Scalar>(state: &IterateState<T>, step: &NewtonStep<T>) -> IterateState<T> {
    let x = state.x.add(&step.dx);
    let z = state.z.add(&step.dz);
    let p: Vec<T> = state.p.iter().zip(&step.dp).map(|(&a, &b)| a + b).collect();
    let phim = duality_gap(&state.x, &state.z);
    let phi = duality_gap(&x, &z);
    IterateState {
        mu: phi / T::from_count(x.n()),
        phi,
        phim,
        xm: state.x.clone(),
        zm: state.z.clone(),
        pm: state.p.clone(),
        x,
        z,
        p,
        iteration: state.iteration + 1,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status")]
pub enum SolveStatus {
    /// `Tr(XZ) <= epsilon`.
    Converged,
    /// The gap increased across an iteration.
    DivergenceGuard,
    IterationCap,
    /// Strict mode stopped at a failing contract.
    InvariantViolation {
        id: String,
        iteration: usize,
    },
}

impl SolveStatus {
    pub fn name(&self) -> &'static str {
        match self {
            SolveStatus::Converged => "Converged",
            SolveStatus::DivergenceGuard => "DivergenceGuard",
            SolveStatus::IterationCap => "IterationCap",
            SolveStatus::InvariantViolation { .. } => "InvariantViolation",
        }
    }
}

/// One loop iteration as recorded by [`solve`].
#[derive(Debug, Clone)]
pub struct IterationLog<T> {
    pub iteration: usize,
    pub dx: SymMatrix<T>,
    pub dz: SymMatrix<T>,
    pub dp: Vec<T>,
    pub state: IterateState<T>,
    pub records: Vec<InvariantRecord>,
    pub potential_tanabe: Option<T>,
    pub potential_loggap: Option<T>,
}

#[derive(Debug, Clone)]
pub struct SolveReport<T> {
    pub status: SolveStatus,
    pub options: SolverOptions<T>,
    /// `nu` used for the potential (given or implied by sigma).
    pub nu: T,
    /// `sigma_from_nu(n, nu)`, for comparison with the sigma actually used.
    pub sigma_from_nu: T,
    pub initial: IterateState<T>,
    pub init_records: Vec<InvariantRecord>,
    pub history: Vec<IterationLog<T>>,
    pub budget: ConvergenceBudget<T>,
    /// Iteration cap in effect for the run.
    pub iteration_cap: usize,
    pub initial_potential_tanabe: Option<T>,
}

impl<T: Scalar> SolveReport<T> {
    pub fn iterations(&self) -> usize {
        self.history.len()
    }

    pub fn final_state(&self) -> &IterateState<T> {
        self.history.last().map_or(&self.initial, |h| &h.state)
    }

    pub fn final_gap(&self) -> T {
        self.final_state().phi
    }

    pub fn records(&self) -> impl Iterator<Item = &InvariantRecord> {
        self.init_records
            .iter()
            .chain(self.history.iter().flat_map(|h| h.records.iter()))
    }

    pub fn failed_records(&self) -> Vec<&InvariantRecord> {
        self.records().filter(|r| !r.passed).collect()
    }

    pub fn is_clean(&self) -> bool {
        self.records().all(|r| r.passed)
    }

    /// Smallest slack per contract id over the whole run.
    pub fn min_slack_by_id(&self) -> std::collections::BTreeMap<String, f64> {
        let mut out = std::collections::BTreeMap::new();
        for r in self.records() {
            let e = out.entry(r.id.clone()).or_insert(f64::INFINITY);
            if r.slack < *e || r.slack.is_nan() {
                *e = r.slack;
            }
        }
        out
    }

    /// Smallest per-iteration decrease of the weighted potential.
    pub fn min_potential_drop(&self) -> Option<T> {
        let mut prev = self.initial_potential_tanabe?;
        let mut min: Option<T> = None;
        for h in &self.history {
            let cur = h.potential_tanabe?;
            let drop = prev - cur;
            min = Some(min.map_or(drop, |m: T| m.min(drop)));
            prev = cur;
        }
        min
    }
}

/// Runs the interior-point loop.
///
/// `hook` is called once per iteration with the previous state, the step
/// and the new state.
pub fn solve<T: Scalar>(
    prob: &SdpProblem<T>,
    opts: &SolverOptions<T>,
    mut hook: impl FnMut(&IterateState<T>, &NewtonStep<T>, &IterateState<T>),
) -> Result<SolveReport<T>> {
    let initial = initialize(prob, None, opts)?;
    let cfg = opts.monitor_config();
    let n = prob.n();
    let nu = opts.effective_nu(n);
    let init_records = check_initialization(prob, &initial, &cfg);
    let budget = iteration_bound(initial.phi, opts.epsilon, opts.sigma)?;
    let cap = opts
        .max_iterations
        .unwrap_or_else(|| 10 * budget.bound_iterations.max(1));

    let mut report = SolveReport {
        status: SolveStatus::Converged,
        options: opts.clone(),
        nu,
        sigma_from_nu: sigma_from_nu(n, nu)?,
        initial_potential_tanabe: potential_tanabe(&initial.x, &initial.z, nu).ok(),
        initial: initial.clone(),
        init_records,
        history: Vec::new(),
        budget,
        iteration_cap: cap,
    };

    if opts.mode == Mode::Strict {
        if let Some(bad) = report.init_records.iter().find(|r| !r.passed) {
            report.status = SolveStatus::InvariantViolation {
                id: bad.id.clone(),
                iteration: 0,
            };
            return Ok(report);
        }
    }

    let mut state = initial;
    while state.phi > opts.epsilon {
        if report.history.len() >= cap {
            report.status = SolveStatus::IterationCap;
            break;
        }
        let pieces = assemble_newton(prob, &state, opts.sigma, opts.tolerances.pd_margin)?;
        let step = solve_newton(prob, pieces, opts.tolerances.lsqr_consistency)?;
        let next = take_step(&state, &step);
        let records = check_iteration(prob, &state, &step, &next, &cfg);
        hook(&state, &step, &next);

        let violation = records.iter().find(|r| !r.passed).map(|r| r.id.clone());
        report.history.push(IterationLog {
            iteration: next.iteration,
            dx: step.dx,
            dz: step.dz,
            dp: step.dp,
            potential_tanabe: potential_tanabe(&next.x, &next.z, nu).ok(),
            potential_loggap: potential_loggap(&next.x, &next.z).ok(),
            state: next.clone(),
            records,
        });
        state = next;

        if opts.mode == Mode::Strict {
            if let Some(id) = violation {
                report.status = SolveStatus::InvariantViolation {
                    id,
                    iteration: state.iteration,
                };
                break;
            }
        }
        if state.phi - state.phim > T::zero() {
            report.status = SolveStatus::DivergenceGuard;
            break;
        }
    }
    Ok(report)
}
