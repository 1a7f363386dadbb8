//! One-sided Jacobi SVD, used for minimum-norm least squares.

use super::dense::{dot, Matrix};
use crate::scalar::Scalar;

const MAX_SWEEPS: usize = 80;

/// Thin singular value decomposition `A = U diag(s) Vᵀ`.
///
/// `u_scaled` holds the columns `s_k u_k`; columns belonging to a zero
/// singular value are left as (near) zero vectors.
#[derive(Debug, Clone)]
pub struct Svd<T> {
    pub u_scaled: Matrix<T>,
    pub singular_values: Vec<T>,
    pub v: Matrix<T>,
}

impl<T: Scalar> Svd<T> {
    pub fn new(a: &Matrix<T>) -> Self {
        let (rows, cols) = (a.rows(), a.cols());
        let mut u = a.clone();
        let mut v = Matrix::identity(cols);
        let two = T::lit(2.0);
        let eps = T::epsilon();

        for _ in 0..MAX_SWEEPS {
            let mut rotated = false;
            for p in 0..cols {
                for q in (p + 1)..cols {
                    let (mut alpha, mut beta, mut gamma) = (T::zero(), T::zero(), T::zero());
                    for i in 0..rows {
                        let up = u[(i, p)];
                        let uq = u[(i, q)];
                        alpha += up * up;
                        beta += uq * uq;
                        gamma += up * uq;
                    }
                    if gamma == T::zero() || gamma.abs() <= eps * (alpha * beta).sqrt() {
                        continue;
                    }
                    rotated = true;
                    let zeta = (beta - alpha) / (two * gamma);
                    let t = zeta.signum() / (zeta.abs() + (T::one() + zeta * zeta).sqrt());
                    let c = T::one() / (T::one() + t * t).sqrt();
                    let s = c * t;
                    for i in 0..rows {
                        let up = u[(i, p)];
                        let uq = u[(i, q)];
                        u[(i, p)] = c * up - s * uq;
                        u[(i, q)] = s * up + c * uq;
                    }
                    for i in 0..cols {
                        let vp = v[(i, p)];
                        let vq = v[(i, q)];
                        v[(i, p)] = c * vp - s * vq;
                        v[(i, q)] = s * vp + c * vq;
                    }
                }
            }
            if !rotated {
                break;
            }
        }

        let singular_values = (0..cols)
            .map(|k| {
                let col: Vec<T> = (0..rows).map(|i| u[(i, k)]).collect();
                dot(&col, &col).sqrt()
            })
            .collect();
        Self {
            u_scaled: u,
            singular_values,
            v,
        }
    }

    pub fn max_singular_value(&self) -> T {
        self.singular_values
            .iter()
            .fold(T::zero(), |m, &s| m.max(s))
    }

    /// Cutoff below which singular values are treated as zero.
    pub fn rank_cutoff(&self) -> T {
        let dims = self.u_scaled.rows().max(self.u_scaled.cols());
        T::epsilon() * T::from_count(dims) * self.max_singular_value()
    }

    pub fn rank(&self) -> usize {
        let cut = self.rank_cutoff();
        self.singular_values.iter().filter(|&&s| s > cut).count()
    }

    /// Ratio of largest to smallest retained singular value.
    pub fn condition_number(&self) -> T {
        let cut = self.rank_cutoff();
        let min = self
            .singular_values
            .iter()
            .filter(|&&s| s > cut)
            .fold(T::infinity(), |m, &s| m.min(s));
        self.max_singular_value() / min
    }

    /// Minimum-norm minimizer of `‖A x − b‖₂`.
    pub fn solve_min_norm(&self, b: &[T]) -> Vec<T> {
        let rows = self.u_scaled.rows();
        let cols = self.u_scaled.cols();
        let cut = self.rank_cutoff();
        let mut x = vec![T::zero(); cols];
        for k in 0..cols {
            let s = self.singular_values[k];
            if s <= cut {
                continue;
            }
            let mut proj = T::zero();
            for i in 0..rows {
                proj += self.u_scaled[(i, k)] * b[i];
            }
            let coef = proj / (s * s);
            for (i, xi) in x.iter_mut().enumerate() {
                *xi += coef * self.v[(i, k)];
            }
        }
        x
    }
}
