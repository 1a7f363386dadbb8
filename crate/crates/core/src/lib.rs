//! Short-step primal-dual interior-point solver for small semidefinite
//! programs, with a runtime contract monitor, an annotated-listing
//! emitter and a JSON-lines proof trace that can be re-checked from
//! its embedded state snapshots.
//!
//! The numeric core is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix the scalar type for the common case.
// Negated comparisons are deliberate: NaN must fall into the failing branch.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod annotator;
pub mod error;
pub mod linalg;
pub mod monitor;
pub mod problem;
pub mod scalar;
pub mod solver;
pub mod symvec;
pub mod synth;

pub use annotator::{
    check_trace, emit_annotated_listing, write_trace, AnnotatedListing, CheckReport, Flavor,
};
pub use error::{Error, Result};
pub use linalg::Matrix;
pub use monitor::{
    check_initialization, check_iteration, iteration_bound, CheckKind, ConvergenceBudget,
    InvariantRecord, MonitorConfig,
};
pub use problem::{load_problem, running_example, SdpProblem};
pub use scalar::Scalar;
pub use solver::{
    initialize, sigma_from_nu, solve, IterateState, Mode, NewtonStep, SolveReport, SolveStatus,
    SolverOptions, Tolerances,
};
pub use symvec::{krons, mats, smat, svec, vecs, SymMatrix, SymVec, Vectorization};

pub type SymMatrixF64 = SymMatrix<f64>;
pub type SymMatrixF32 = SymMatrix<f32>;
pub type SdpProblemF64 = SdpProblem<f64>;
pub type SdpProblemF32 = SdpProblem<f32>;
pub type SolverOptionsF64 = SolverOptions<f64>;
pub type SolverOptionsF32 = SolverOptions<f32>;
pub type IterateStateF64 = IterateState<f64>;
pub type IterateStateF32 = IterateState<f32>;
pub type NewtonStepF64 = NewtonStep<f64>;
pub type NewtonStepF32 = NewtonStep<f32>;
pub type SolveReportF64 = SolveReport<f64>;
pub type SolveReportF32 = SolveReport<f32>;
pub type ConvergenceBudgetF64 = ConvergenceBudget<f64>;
pub type ConvergenceBudgetF32 = ConvergenceBudget<f32>;

/// Version string written into trace headers.
pub const TOOL_VERSION: &str = concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION"));
