//! Symmetric-matrix vectorization.
//!
//! Entries are enumerated over the upper triangle `(i, j)` with `i ≤ j` in
//! row-major order. For `n = 3` the order is
//! `(0,0) (0,1) (0,2) (1,1) (1,2) (2,2)`. Every routine here (`vecs`, `mats`,
//! `svec`, `smat`, `krons`) shares that ordering.
//!
//! Two scalings are provided:
//!
//! * `vecs` / `mats` multiply off-diagonal entries by `√2`, which makes the
//!   map an isometry: `⟨vecs A, vecs B⟩ = Tr(AB)`.
//! * `svec` / `smat` multiply off-diagonal entries by `2`; this is the
//!   convention the contract language uses.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Scalar;

/// Symmetric `n × n` matrix. `entries[i][j] == entries[j][i]` holds exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix<T> {
    inner: Matrix<T>,
}

impl<T: Scalar> SymMatrix<T> {
    /// Validates symmetry up to `tol` (relative to the largest entry) and
    /// then averages mirrored entries so symmetry holds exactly.
    pub fn from_matrix(m: Matrix<T>, tol: T, context: &str) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::Dimension {
                context: "SymMatrix::from_matrix",
                expected: m.rows(),
                found: m.cols(),
            });
        }
        if m.rows() == 0 {
            return Err(Error::Dimension {
                context: "SymMatrix::from_matrix (n >= 1)",
                expected: 1,
                found: 0,
            });
        }
        let scale = m.max_abs().max(T::one());
        let n = m.rows();
        for i in 0..n {
            for j in (i + 1)..n {
                let d = (m[(i, j)] - m[(j, i)]).abs();
                if !(d <= tol * scale) {
                    return Err(Error::Asymmetric {
                        context: context.to_string(),
                        row: i,
                        col: j,
                        difference: d.as_f64(),
                    });
                }
            }
        }
        Ok(Self::symmetrize(&m))
    }

    /// Symmetric part `½(M + Mᵀ)` of a square matrix.
    pub fn symmetrize(m: &Matrix<T>) -> Self {
        assert!(m.is_square(), "symmetrize needs a square matrix");
        let half = T::lit(0.5);
        let n = m.rows();
        let mut out = Matrix::zeros(n, n);
        for i in 0..n {
            out[(i, i)] = m[(i, i)];
            for j in (i + 1)..n {
                let v = half * (m[(i, j)] + m[(j, i)]);
                out[(i, j)] = v;
                out[(j, i)] = v;
            }
        }
        Self { inner: out }
    }

    pub fn from_rows<R: AsRef<[T]>>(rows: &[R]) -> Result<Self> {
        Self::from_matrix(Matrix::from_rows(rows)?, T::zero(), "SymMatrix::from_rows")
    }

    pub fn identity(n: usize) -> Self {
        Self {
            inner: Matrix::identity(n),
        }
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            inner: Matrix::zeros(n, n),
        }
    }

    pub fn from_diag(d: &[T]) -> Self {
        Self {
            inner: Matrix::from_diag(d),
        }
    }

    pub fn n(&self) -> usize {
        self.inner.rows()
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.inner[(i, j)]
    }

    pub fn as_matrix(&self) -> &Matrix<T> {
        &self.inner
    }

    pub fn into_matrix(self) -> Matrix<T> {
        self.inner
    }

    pub fn scale(&self, s: T) -> Self {
        Self {
            inner: self.inner.scale(s),
        }
    }

    pub fn add(&self, rhs: &Self) -> Self {
        Self {
            inner: &self.inner + &rhs.inner,
        }
    }

    pub fn sub(&self, rhs: &Self) -> Self {
        Self {
            inner: &self.inner - &rhs.inner,
        }
    }

    pub fn cast<U: Scalar>(&self) -> SymMatrix<U> {
        SymMatrix {
            inner: self.inner.cast(),
        }
    }

    pub fn to_rows(&self) -> Vec<Vec<T>> {
        self.inner.to_rows()
    }
}

/// Vectorized symmetric matrix of length `n(n+1)/2`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymVec<T> {
    n: usize,
    data: Vec<T>,
}

impl<T: Scalar> SymVec<T> {
    pub fn new(n: usize, data: Vec<T>) -> Result<Self> {
        let expected = packed_len(n);
        if data.len() != expected {
            return Err(Error::Dimension {
                context: "SymVec::new",
                expected,
                found: data.len(),
            });
        }
        Ok(Self { n, data })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }
}

/// Which off-diagonal scaling a vectorized quantity uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Vectorization {
    /// Off-diagonals times `√2` (`vecs` / `mats`).
    Vecs,
    /// Off-diagonals times `2` (`svec` / `smat`).
    Svec,
}

impl Vectorization {
    pub fn name(self) -> &'static str {
        match self {
            Vectorization::Vecs => "vecs",
            Vectorization::Svec => "svec",
        }
    }

    fn factor<T: Scalar>(self) -> T {
        match self {
            Vectorization::Vecs => T::lit(2.0).sqrt(),
            Vectorization::Svec => T::lit(2.0),
        }
    }
}

/// `n(n+1)/2`.
pub fn packed_len(n: usize) -> usize {
    n * (n + 1) / 2
}

/// Upper-triangular index pairs in the shared ordering.
pub fn index_pairs(n: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(packed_len(n));
    for i in 0..n {
        for j in i..n {
            out.push((i, j));
        }
    }
    out
}

/// Recovers `n` from a packed length, if it is triangular.
pub fn dimension_from_len(len: usize) -> Option<usize> {
    let mut n = 0;
    while packed_len(n) < len {
        n += 1;
    }
    (packed_len(n) == len).then_some(n)
}

fn pack<T: Scalar>(m: &SymMatrix<T>, conv: Vectorization) -> SymVec<T> {
    let f: T = conv.factor();
    let n = m.n();
    let data = index_pairs(n)
        .into_iter()
        .map(|(i, j)| if i == j { m.get(i, i) } else { f * m.get(i, j) })
        .collect();
    SymVec { n, data }
}

fn unpack<T: Scalar>(v: &[T], n: usize, conv: Vectorization) -> Result<SymMatrix<T>> {
    let expected = packed_len(n);
    if v.len() != expected {
        return Err(Error::Dimension {
            context: "mats/smat",
            expected,
            found: v.len(),
        });
    }
    let f: T = conv.factor();
    let mut m = Matrix::zeros(n, n);
    for (k, (i, j)) in index_pairs(n).into_iter().enumerate() {
        if i == j {
            m[(i, i)] = v[k];
        } else {
            let x = v[k] / f;
            m[(i, j)] = x;
            m[(j, i)] = x;
        }
    }
    Ok(SymMatrix { inner: m })
}

pub fn vecs<T: Scalar>(m: &SymMatrix<T>) -> SymVec<T> {
    pack(m, Vectorization::Vecs)
}

pub fn mats<T: Scalar>(v: &[T], n: usize) -> Result<SymMatrix<T>> {
    unpack(v, n, Vectorization::Vecs)
}

pub fn svec<T: Scalar>(m: &SymMatrix<T>) -> SymVec<T> {
    pack(m, Vectorization::Svec)
}

pub fn smat<T: Scalar>(v: &[T], n: usize) -> Result<SymMatrix<T>> {
    unpack(v, n, Vectorization::Svec)
}

/// Symmetric Kronecker product as a dense `N × N` matrix, `N = n(n+1)/2`.
///
/// Satisfies `krons(Q1, Q2) · vecs(M) = vecs(½(Q1 M Q2ᵀ + Q2 M Q1ᵀ))` for
/// every symmetric `M`. `Q1` and `Q2` need not be symmetric.
pub fn krons<T: Scalar>(q1: &Matrix<T>, q2: &Matrix<T>) -> Result<Matrix<T>> {
    let n = q1.rows();
    for (q, ctx) in [(q1, "krons: Q1 square"), (q2, "krons: Q2 square")] {
        if !q.is_square() {
            return Err(Error::Dimension {
                context: ctx,
                expected: q.rows(),
                found: q.cols(),
            });
        }
    }
    if q2.rows() != n {
        return Err(Error::Dimension {
            context: "krons: Q1/Q2 dimension",
            expected: n,
            found: q2.rows(),
        });
    }
    let pairs = index_pairs(n);
    let half = T::lit(0.5);
    let sqrt2 = T::lit(2.0).sqrt();
    // Row (i,j) picks up √2 off the diagonal; column (k,l) is the basis
    // element whose vecs is a unit vector, giving ½ on the diagonal and
    // 1/√2 off it once the four product terms are summed.
    let row_scale = |i: usize, j: usize| if i == j { T::one() } else { sqrt2 };
    let col_scale = |k: usize, l: usize| if k == l { half } else { T::one() / sqrt2 };

    let big = pairs.len();
    let mut out = Matrix::zeros(big, big);
    for (r, &(i, j)) in pairs.iter().enumerate() {
        for (c, &(k, l)) in pairs.iter().enumerate() {
            let t = q1[(i, k)] * q2[(j, l)]
                + q1[(i, l)] * q2[(j, k)]
                + q2[(i, k)] * q1[(j, l)]
                + q2[(i, l)] * q1[(j, k)];
            out[(r, c)] = half * row_scale(i, j) * col_scale(k, l) * t;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vecs_examples() {
        let i2 = SymMatrix::<f64>::identity(2);
        assert_eq!(vecs(&i2).as_slice(), &[1.0, 0.0, 1.0]);
        let ones = SymMatrix::<f64>::from_rows(&[[1.0, 1.0], [1.0, 1.0]]).unwrap();
        assert_eq!(vecs(&ones).as_slice(), &[1.0, 2f64.sqrt(), 1.0]);
    }

    #[test]
    fn mats_examples() {
        assert_eq!(mats(&[1.0, 0.0, 1.0], 2).unwrap(), SymMatrix::identity(2));
        let m = mats(&[1.0, 2f64.sqrt(), 1.0], 2).unwrap();
        assert!((m.get(0, 1) - 1.0).abs() < 1e-15);
        assert!(matches!(
            mats(&[1.0, 2.0], 2),
            Err(Error::Dimension {
                expected: 3,
                found: 2,
                ..
            })
        ));
    }

    #[test]
    fn smat_reproduces_contract_example() {
        let m = smat(&[0.4, -0.2, 0.2], 2).unwrap();
        assert_eq!(m.to_rows(), vec![vec![0.4, -0.1], vec![-0.1, 0.2]]);
        assert_eq!(
            svec(&SymMatrix::<f64>::identity(2)).as_slice(),
            &[1.0, 0.0, 1.0]
        );
        assert!(smat(&[1.0; 4], 2).is_err());
    }

    #[test]
    fn ordering_is_row_major_upper() {
        assert_eq!(
            index_pairs(3),
            vec![(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)]
        );
        assert_eq!(dimension_from_len(6), Some(3));
        assert_eq!(dimension_from_len(5), None);
    }

    #[test]
    fn krons_identity_acts_as_identity() {
        let k = krons(&Matrix::<f64>::identity(3), &Matrix::identity(3)).unwrap();
        assert!((&k - &Matrix::identity(6)).max_abs() < 1e-15);
    }

    #[test]
    fn krons_rejects_mismatched_inputs() {
        let a = Matrix::<f64>::identity(2);
        let b = Matrix::<f64>::identity(3);
        assert!(krons(&a, &b).is_err());
        assert!(krons(&Matrix::<f64>::zeros(2, 3), &a).is_err());
    }

    #[test]
    fn asymmetric_input_rejected() {
        let m = Matrix::<f64>::from_rows(&[[1.0, 2.0], [2.5, 1.0]]).unwrap();
        assert!(matches!(
            SymMatrix::from_matrix(m, 1e-12, "test"),
            Err(Error::Asymmetric { row: 0, col: 1, .. })
        ));
    }
}
