//! SDP problem data, costs, residuals, and merit functions.
//!
//! The pair of problems is
//!
//! ```text
//! primal:  minimize ⟨b, p⟩   s.t.  F0 + Σ p_i F_i + X = 0,  X ⪰ 0
//! dual:    maximize −⟨F0, Z⟩ s.t.  ⟨F_i, Z⟩ + b_i = 0,     Z ⪰ 0
//! ```
//!
//! and for feasible points `⟨b, p⟩ − ⟨F0, Z⟩ = Tr(XZ)`.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::linalg::{self, is_pd, log_det, trace_inner, Matrix, PdCertificate};
use crate::scalar::Scalar;
use crate::symvec::{packed_len, vecs, SymMatrix};

/// Relative tolerance used when validating symmetry of file data.
const FILE_SYMMETRY_TOL: f64 = 1e-12;

/// Validated SDP instance. Immutable after construction.
#[derive(Debug, Clone)]
pub struct SdpProblem<T> {
    n: usize,
    m: usize,
    f0: SymMatrix<T>,
    f: Vec<SymMatrix<T>>,
    b: Vec<T>,
    /// Rows are `vecs(F_i)`; shape `m × n(n+1)/2`.
    fmat: Matrix<T>,
    f0_certificate: PdCertificate<T>,
    x0: Option<SymMatrix<T>>,
    epsilon: Option<T>,
    nu: Option<T>,
}

impl<T: Scalar> SdpProblem<T> {
    pub fn new(f0: SymMatrix<T>, f: Vec<SymMatrix<T>>, b: Vec<T>) -> Result<Self> {
        let n = f0.n();
        let m = b.len();
        if m == 0 {
            return Err(Error::Dimension {
                context: "SdpProblem: m >= 1",
                expected: 1,
                found: 0,
            });
        }
        if f.len() != m {
            return Err(Error::Dimension {
                context: "SdpProblem: number of F_i vs length of b",
                expected: m,
                found: f.len(),
            });
        }
        if let Some(bad) = f.iter().find(|fi| fi.n() != n) {
            return Err(Error::Dimension {
                context: "SdpProblem: dim(F_i) vs dim(F0)",
                expected: n,
                found: bad.n(),
            });
        }
        if b.iter().any(|v| !v.is_finite())
            || !f0.as_matrix().is_finite()
            || f.iter().any(|fi| !fi.as_matrix().is_finite())
        {
            return Err(Error::NonFinite("problem data".into()));
        }
        let f0_certificate = is_pd(&f0, T::tol_floor(linalg::DEFAULT_PD_TOL)).map_err(|e| {
            Error::NotPositiveDefinite {
                context: "F0".into(),
                min_eigenvalue: e.min_eigenvalue.as_f64(),
            }
        })?;
        let big = packed_len(n);
        let mut fmat = Matrix::zeros(m, big);
        for (i, fi) in f.iter().enumerate() {
            for (k, &v) in vecs(fi).as_slice().iter().enumerate() {
                fmat[(i, k)] = v;
            }
        }
        Ok(Self {
            n,
            m,
            f0,
            f,
            b,
            fmat,
            f0_certificate,
            x0: None,
            epsilon: None,
            nu: None,
        })
    }

    pub fn with_initial_point(mut self, x0: SymMatrix<T>) -> Result<Self> {
        if x0.n() != self.n {
            return Err(Error::Dimension {
                context: "X0 dimension",
                expected: self.n,
                found: x0.n(),
            });
        }
        self.x0 = Some(x0);
        Ok(self)
    }

    pub fn with_epsilon(mut self, epsilon: T) -> Self {
        self.epsilon = Some(epsilon);
        self
    }

    pub fn with_nu(mut self, nu: T) -> Self {
        self.nu = Some(nu);
        self
    }

    /// Swaps in a new `F0` without the positive-definiteness check.
    ///
    /// Only meant for exercising the initialization monitor on data that
    /// the loader would reject. The stored certificate keeps the old value.
    #[doc(hidden)]
    pub fn with_f0_unchecked(mut self, f0: SymMatrix<T>) -> Result<Self> {
        self.check_dim(&f0, "with_f0_unchecked: dim(F0)")?;
        self.f0 = f0;
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn f0(&self) -> &SymMatrix<T> {
        &self.f0
    }

    pub fn constraints(&self) -> &[SymMatrix<T>] {
        &self.f
    }

    pub fn b(&self) -> &[T] {
        &self.b
    }

    /// Stacked `[vecs(F1); …; vecs(Fm)]`.
    pub fn fmat(&self) -> &Matrix<T> {
        &self.fmat
    }

    pub fn f0_certificate(&self) -> PdCertificate<T> {
        self.f0_certificate
    }

    pub fn x0(&self) -> Option<&SymMatrix<T>> {
        self.x0.as_ref()
    }

    pub fn epsilon(&self) -> Option<T> {
        self.epsilon
    }

    pub fn nu(&self) -> Option<T> {
        self.nu
    }

    /// `Σ p_i F_i`.
    pub fn combine(&self, p: &[T]) -> Result<SymMatrix<T>> {
        self.check_len(p.len(), "combine: length of p")?;
        let mut acc = Matrix::zeros(self.n, self.n);
        for (pi, fi) in p.iter().zip(&self.f) {
            acc = &acc + &fi.as_matrix().scale(*pi);
        }
        Ok(SymMatrix::symmetrize(&acc))
    }

    fn check_len(&self, found: usize, context: &'static str) -> Result<()> {
        if found != self.m {
            return Err(Error::Dimension {
                context,
                expected: self.m,
                found,
            });
        }
        Ok(())
    }

    fn check_dim(&self, s: &SymMatrix<T>, context: &'static str) -> Result<()> {
        if s.n() != self.n {
            return Err(Error::Dimension {
                context,
                expected: self.n,
                found: s.n(),
            });
        }
        Ok(())
    }

    /// Converts the problem into its file representation.
    pub fn to_file(&self) -> ProblemFile {
        let rows = |s: &SymMatrix<T>| -> Vec<Vec<f64>> {
            s.to_rows()
                .into_iter()
                .map(|r| r.into_iter().map(Scalar::as_f64).collect())
                .collect()
        };
        ProblemFile {
            n: self.n,
            m: self.m,
            f0: rows(&self.f0),
            f: self.f.iter().map(rows).collect(),
            b: self.b.iter().map(|v| v.as_f64()).collect(),
            x0: self.x0.as_ref().map(rows),
            epsilon: self.epsilon.map(Scalar::as_f64),
            nu: self.nu.map(Scalar::as_f64),
        }
    }

    /// SHA-256 over a canonical rendering of every number in the problem.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        let mut put = |tag: &str, vals: &mut dyn Iterator<Item = f64>| {
            h.update(tag.as_bytes());
            for v in vals {
                h.update(format!("{v:.16e};").as_bytes());
            }
        };
        put(
            &format!("n={};m={};", self.n, self.m),
            &mut std::iter::empty(),
        );
        put(
            "F0:",
            &mut self.f0.as_matrix().as_slice().iter().map(|v| v.as_f64()),
        );
        for (i, fi) in self.f.iter().enumerate() {
            put(
                &format!("F{}:", i + 1),
                &mut fi.as_matrix().as_slice().iter().map(|v| v.as_f64()),
            );
        }
        put("b:", &mut self.b.iter().map(|v| v.as_f64()));
        if let Some(x0) = &self.x0 {
            put(
                "X0:",
                &mut x0.as_matrix().as_slice().iter().map(|v| v.as_f64()),
            );
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// On-disk problem description (UTF-8 JSON, row-major matrices).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub n: usize,
    pub m: usize,
    #[serde(rename = "F0")]
    pub f0: Vec<Vec<f64>>,
    #[serde(rename = "F")]
    pub f: Vec<Vec<Vec<f64>>>,
    pub b: Vec<f64>,
    #[serde(rename = "X0", default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nu: Option<f64>,
}

impl ProblemFile {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("problem file serializes")
    }
}

fn sym_from_rows<T: Scalar>(rows: &[Vec<f64>], n: usize, what: &str) -> Result<SymMatrix<T>> {
    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
        return Err(Error::Parse(format!("{what} must be {n}x{n}")));
    }
    let data: Vec<T> = rows.iter().flatten().map(|&v| T::lit(v)).collect();
    let m = Matrix::from_row_major(n, n, data)?;
    SymMatrix::from_matrix(m, T::lit(FILE_SYMMETRY_TOL), what)
}

/// Parses and validates a problem file.
pub fn load_problem<T: Scalar>(source: &[u8]) -> Result<SdpProblem<T>> {
    let file: ProblemFile =
        serde_json::from_slice(source).map_err(|e| Error::Parse(e.to_string()))?;
    problem_from_file(&file)
}

pub fn problem_from_file<T: Scalar>(file: &ProblemFile) -> Result<SdpProblem<T>> {
    let n = file.n;
    if n == 0 {
        return Err(Error::Parse("n must be at least 1".into()));
    }
    if file.m != file.b.len() || file.m != file.f.len() {
        return Err(Error::Parse(format!(
            "m = {} but b has {} entries and F has {} matrices",
            file.m,
            file.b.len(),
            file.f.len()
        )));
    }
    let f0 = sym_from_rows(&file.f0, n, "F0")?;
    let f = file
        .f
        .iter()
        .enumerate()
        .map(|(i, rows)| sym_from_rows(rows, n, &format!("F{}", i + 1)))
        .collect::<Result<Vec<_>>>()?;
    let b = file.b.iter().map(|&v| T::lit(v)).collect();
    let mut prob = SdpProblem::new(f0, f, b)?;
    if let Some(x0) = &file.x0 {
        prob = prob.with_initial_point(sym_from_rows(x0, n, "X0")?)?;
    }
    if let Some(eps) = file.epsilon {
        prob = prob.with_epsilon(T::lit(eps));
    }
    if let Some(nu) = file.nu {
        prob = prob.with_nu(T::lit(nu));
    }
    Ok(prob)
}

/// Primal/dual iterate `(X, Z, p)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PrimalDualPoint<T> {
    pub x: SymMatrix<T>,
    pub z: SymMatrix<T>,
    pub p: Vec<T>,
}

/// `⟨F0, Z⟩`.
pub fn dual_cost<T: Scalar>(prob: &SdpProblem<T>, z: &SymMatrix<T>) -> Result<T> {
    prob.check_dim(z, "dual_cost: dim(Z)")?;
    trace_inner(prob.f0().as_matrix(), z.as_matrix())
}

/// `⟨b, p⟩`.
pub fn primal_cost<T: Scalar>(prob: &SdpProblem<T>, p: &[T]) -> Result<T> {
    prob.check_len(p.len(), "primal_cost: length of p")?;
    Ok(linalg::dot(prob.b(), p))
}

/// `Tr(XZ)`.
pub fn duality_gap<T: Scalar>(x: &SymMatrix<T>, z: &SymMatrix<T>) -> T {
    trace_inner(x.as_matrix(), z.as_matrix()).expect("duality_gap: X and Z must share dimension")
}

/// `F0 + Σ p_i F_i + X`.
pub fn primal_residual<T: Scalar>(
    prob: &SdpProblem<T>,
    x: &SymMatrix<T>,
    p: &[T],
) -> Result<SymMatrix<T>> {
    prob.check_dim(x, "primal_residual: dim(X)")?;
    Ok(prob.f0().add(&prob.combine(p)?).add(x))
}

/// `(⟨F_i, Z⟩ + b_i)_i`.
pub fn dual_residual<T: Scalar>(prob: &SdpProblem<T>, z: &SymMatrix<T>) -> Result<Vec<T>> {
    prob.check_dim(z, "dual_residual: dim(Z)")?;
    Ok(prob
        .constraints()
        .iter()
        .zip(prob.b())
        .map(|(fi, &bi)| trace_inner(fi.as_matrix(), z.as_matrix()).expect("checked") + bi)
        .collect())
}

fn log_dets<T: Scalar>(x: &SymMatrix<T>, z: &SymMatrix<T>) -> Result<(T, T)> {
    let ldx = log_det(x).ok_or_else(|| Error::NotPositiveDefinite {
        context: "X".into(),
        min_eigenvalue: linalg::min_eigenvalue(x).as_f64(),
    })?;
    let ldz = log_det(z).ok_or_else(|| Error::NotPositiveDefinite {
        context: "Z".into(),
        min_eigenvalue: linalg::min_eigenvalue(z).as_f64(),
    })?;
    Ok((ldx, ldz))
}

/// `(n + ν√n) log Tr(XZ) − log det(XZ) − n log n`.
pub fn potential_tanabe<T: Scalar>(x: &SymMatrix<T>, z: &SymMatrix<T>, nu: T) -> Result<T> {
    let (ldx, ldz) = log_dets(x, z)?;
    let n = T::from_count(x.n());
    let gap = potential_loggap(x, z)?;
    Ok((n + nu * n.sqrt()) * gap - (ldx + ldz) - n * n.ln())
}

/// `log Tr(XZ)`.
pub fn potential_loggap<T: Scalar>(x: &SymMatrix<T>, z: &SymMatrix<T>) -> Result<T> {
    let gap = duality_gap(x, z);
    if !(gap > T::zero()) {
        return Err(Error::NonPositiveGap(gap.as_f64()));
    }
    Ok(gap.ln())
}

/// `−log det X − log det Z`.
pub fn barrier<T: Scalar>(x: &SymMatrix<T>, z: &SymMatrix<T>) -> Result<T> {
    let (ldx, ldz) = log_dets(x, z)?;
    Ok(-ldx - ldz)
}

/// The bundled running-example problem file.
pub const RUNNING_EXAMPLE_JSON: &str = include_str!("../data/running_example.json");

pub fn running_example<T: Scalar>() -> SdpProblem<T> {
    load_problem(RUNNING_EXAMPLE_JSON.as_bytes()).expect("bundled running example is valid")
}
