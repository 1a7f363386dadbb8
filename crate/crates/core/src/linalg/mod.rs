//! Contracted linear-algebra primitives.
//!
//! Square root and inverse of symmetric positive-definite matrices go
//! through a symmetric eigendecomposition, which also supplies the
//! eigenvalue witness behind [`is_pd`]. Least squares returns the
//! minimum-norm solution via a Jacobi SVD.

mod dense;
mod eigen;
mod svd;

pub use dense::{axpy, dot, norm2, Matrix};
pub use eigen::SymmetricEigen;
pub use svd::Svd;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::symvec::SymMatrix;

/// Default absolute margin on the smallest eigenvalue for `S ≻ 0`.
pub const DEFAULT_PD_TOL: f64 = 1e-12;

/// Default lsqr consistency tolerance, scaled by `max(1, ‖b‖)`.
pub const DEFAULT_LSQR_TOL: f64 = 1e-9;

/// Witness that a matrix is positive definite with margin `tolerance`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PdCertificate<T> {
    pub min_eigenvalue: T,
    pub tolerance: T,
}

/// Failed positive-definiteness test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PdFailure<T> {
    pub min_eigenvalue: T,
    pub tolerance: T,
}

/// Certificate iff the smallest eigenvalue exceeds `tol`.
pub fn is_pd<T: Scalar>(s: &SymMatrix<T>, tol: T) -> Result<PdCertificate<T>, PdFailure<T>> {
    let min_eigenvalue = min_eigenvalue(s);
    // NaN falls through to the failure branch.
    if min_eigenvalue > tol {
        Ok(PdCertificate {
            min_eigenvalue,
            tolerance: tol,
        })
    } else {
        Err(PdFailure {
            min_eigenvalue,
            tolerance: tol,
        })
    }
}

pub fn min_eigenvalue<T: Scalar>(s: &SymMatrix<T>) -> T {
    if !s.as_matrix().is_finite() {
        return T::nan();
    }
    SymmetricEigen::new(s.as_matrix()).min()
}

fn require_pd<T: Scalar>(s: &SymMatrix<T>, tol: T, context: &str) -> Result<SymmetricEigen<T>> {
    let eig = SymmetricEigen::new(s.as_matrix());
    let min = eig.min();
    if min > tol {
        Ok(eig)
    } else {
        Err(Error::NotPositiveDefinite {
            context: context.to_string(),
            min_eigenvalue: min.as_f64(),
        })
    }
}

/// Symmetric positive-definite square root.
pub fn sym_sqrt<T: Scalar>(s: &SymMatrix<T>) -> Result<SymMatrix<T>> {
    sym_sqrt_with_tol(s, T::tol_floor(DEFAULT_PD_TOL))
}

pub fn sym_sqrt_with_tol<T: Scalar>(s: &SymMatrix<T>, tol: T) -> Result<SymMatrix<T>> {
    let eig = require_pd(s, tol, "sym_sqrt")?;
    Ok(SymMatrix::symmetrize(&eig.map_spectrum(|l| l.sqrt())))
}

/// Inverse of a symmetric positive-definite matrix.
pub fn sym_inv<T: Scalar>(s: &SymMatrix<T>) -> Result<SymMatrix<T>> {
    sym_inv_with_tol(s, T::tol_floor(DEFAULT_PD_TOL))
}

pub fn sym_inv_with_tol<T: Scalar>(s: &SymMatrix<T>, tol: T) -> Result<SymMatrix<T>> {
    let eig = require_pd(s, tol, "sym_inv")?;
    Ok(SymMatrix::symmetrize(&eig.map_spectrum(|l| l.recip())))
}

/// `log det S` as a sum of log-eigenvalues; `None` unless `S ≻ 0`.
pub fn log_det<T: Scalar>(s: &SymMatrix<T>) -> Option<T> {
    let eig = SymmetricEigen::new(s.as_matrix());
    if eig.min() > T::zero() {
        Some(eig.values.iter().fold(T::zero(), |acc, &l| acc + l.ln()))
    } else {
        None
    }
}

/// Minimum-2-norm minimizer of `‖A x − b‖₂` (no contract check).
pub fn min_norm_least_squares<T: Scalar>(a: &Matrix<T>, b: &[T]) -> Result<Vec<T>> {
    if a.rows() != b.len() {
        return Err(Error::Dimension {
            context: "lsqr: rows of A vs length of b",
            expected: a.rows(),
            found: b.len(),
        });
    }
    Ok(Svd::new(a).solve_min_norm(b))
}

/// Result of a contracted least-squares solve.
#[derive(Debug, Clone, PartialEq)]
pub struct LsqrSolution<T> {
    pub x: Vec<T>,
    /// `‖A x − b‖₂`.
    pub residual: T,
    /// Absolute tolerance the residual was held to.
    pub tolerance: T,
}

/// Minimum-norm least squares for a system expected to be consistent.
///
/// The contract `‖A x − b‖₂ ≤ tol · max(1, ‖b‖₂)` is asserted;
/// `equation` names the system in the error.
pub fn lsqr_solve<T: Scalar>(
    a: &Matrix<T>,
    b: &[T],
    tol: T,
    equation: &str,
) -> Result<LsqrSolution<T>> {
    if b.iter().any(|v| !v.is_finite()) || !a.is_finite() {
        return Err(Error::NonFinite(format!("lsqr input ({equation})")));
    }
    let x = min_norm_least_squares(a, b)?;
    let ax = a.matvec(&x)?;
    let diff: Vec<T> = ax.iter().zip(b).map(|(&p, &q)| p - q).collect();
    let residual = norm2(&diff);
    let tolerance = tol * norm2(b).max(T::one());
    if !(residual <= tolerance) {
        return Err(Error::LsqrContractViolation {
            equation: equation.to_string(),
            residual: residual.as_f64(),
            tolerance: tolerance.as_f64(),
        });
    }
    Ok(LsqrSolution {
        x,
        residual,
        tolerance,
    })
}

/// `‖A‖_F`.
pub fn frob_norm<T: Scalar>(m: &Matrix<T>) -> T {
    m.frobenius()
}

/// `⟨A, B⟩ = Tr(Bᵀ A)`.
pub fn trace_inner<T: Scalar>(a: &Matrix<T>, b: &Matrix<T>) -> Result<T> {
    if a.rows() != b.rows() || a.cols() != b.cols() {
        return Err(Error::Dimension {
            context: "trace_inner",
            expected: a.rows() * a.cols(),
            found: b.rows() * b.cols(),
        });
    }
    Ok(dot(a.as_slice(), b.as_slice()))
}
