//! Cyclic Jacobi eigensolver for small symmetric matrices.

use super::dense::Matrix;
use crate::scalar::Scalar;

const MAX_SWEEPS: usize = 100;

/// Spectral decomposition `S = V diag(values) Vᵀ`, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct SymmetricEigen<T> {
    pub values: Vec<T>,
    /// Eigenvectors stored as columns, matching the order of `values`.
    pub vectors: Matrix<T>,
}

impl<T: Scalar> SymmetricEigen<T> {
    /// Decomposes a symmetric matrix. Only the upper triangle is trusted.
    pub fn new(s: &Matrix<T>) -> Self {
        let n = s.rows();
        debug_assert!(s.is_square());
        let mut a = Matrix::from_fn(n, n, |i, j| if i <= j { s[(i, j)] } else { s[(j, i)] });
        let mut v = Matrix::identity(n);
        let two = T::lit(2.0);

        for _ in 0..MAX_SWEEPS {
            let off = off_diagonal_norm(&a);
            let scale = a.frobenius();
            if off <= T::epsilon() * scale || off == T::zero() {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    let apq = a[(p, q)];
                    if apq == T::zero() {
                        continue;
                    }
                    let app = a[(p, p)];
                    let aqq = a[(q, q)];
                    let theta = (aqq - app) / (two * apq);
                    let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                    let c = T::one() / (t * t + T::one()).sqrt();
                    let sn = t * c;

                    for k in 0..n {
                        let akp = a[(k, p)];
                        let akq = a[(k, q)];
                        a[(k, p)] = c * akp - sn * akq;
                        a[(k, q)] = sn * akp + c * akq;
                    }
                    for k in 0..n {
                        let apk = a[(p, k)];
                        let aqk = a[(q, k)];
                        a[(p, k)] = c * apk - sn * aqk;
                        a[(q, k)] = sn * apk + c * aqk;
                    }
                    a[(p, q)] = T::zero();
                    a[(q, p)] = T::zero();
                    for k in 0..n {
                        let vkp = v[(k, p)];
                        let vkq = v[(k, q)];
                        v[(k, p)] = c * vkp - sn * vkq;
                        v[(k, q)] = sn * vkp + c * vkq;
                    }
                }
            }
        }

        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| {
            a[(i, i)]
                .partial_cmp(&a[(j, j)])
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        let values = order.iter().map(|&i| a[(i, i)]).collect();
        let vectors = Matrix::from_fn(n, n, |r, c| v[(r, order[c])]);
        Self { values, vectors }
    }

    pub fn min(&self) -> T {
        self.values.first().copied().unwrap_or_else(T::nan)
    }

    pub fn max(&self) -> T {
        self.values.last().copied().unwrap_or_else(T::nan)
    }

    /// Rebuilds `V f(Λ) Vᵀ`, symmetrized exactly.
    pub fn map_spectrum(&self, f: impl Fn(T) -> T) -> Matrix<T> {
        let n = self.values.len();
        let mapped: Vec<T> = self.values.iter().map(|&l| f(l)).collect();
        let mut out = Matrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let mut acc = T::zero();
                for k in 0..n {
                    acc += self.vectors[(i, k)] * mapped[k] * self.vectors[(j, k)];
                }
                out[(i, j)] = acc;
                out[(j, i)] = acc;
            }
        }
        out
    }
}

fn off_diagonal_norm<T: Scalar>(a: &Matrix<T>) -> T {
    let n = a.rows();
    let mut acc = T::zero();
    for i in 0..n {
        for j in 0..n {
            if i != j {
                acc += a[(i, j)] * a[(i, j)];
            }
        }
    }
    acc.sqrt()
}
