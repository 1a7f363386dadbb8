//! Seeded generator for small strictly feasible problems.
//!
//! Instances have `m = n(n+1)/2` linearly independent constraints, so the
//! constraint matrices span the symmetric matrices and every Newton
//! equation is consistent. The initial pair is placed inside the
//! central-path neighborhood by construction:
//!
//! ```text
//! Z0 ≻ 0 random,  Z0^{1/2} X0 Z0^{1/2} = mu·I + E,  Tr(E) = 0,  ‖E‖_F ≤ 0.2·mu
//! b_i = −⟨F_i, Z0⟩,  F0 ≻ 0 random,  p0 solves F0 + Σ p_i F_i + X0 = 0
//! ```

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{sym_inv, sym_sqrt, Matrix, Svd};
use crate::problem::SdpProblem;
use crate::scalar::Scalar;
use crate::symvec::{packed_len, SymMatrix};

/// Largest accepted condition number of the stacked constraint matrix.
const MAX_CONDITION: f64 = 1e4;
/// Relative size of the off-center perturbation `E`.
const CENTERING: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthOptions {
    pub n: usize,
    /// Initial gap is drawn uniformly from this range.
    pub gap_range: (f64, f64),
    pub epsilon: f64,
}

impl SynthOptions {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            gap_range: (0.01, 0.1),
            epsilon: 1e-8,
        }
    }
}

fn random_sym(rng: &mut ChaCha8Rng, n: usize) -> Matrix<f64> {
    let a = Matrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
    (&a + &a.transpose()).scale(0.5)
}

fn random_spd(rng: &mut ChaCha8Rng, n: usize) -> Matrix<f64> {
    let a = Matrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
    &(&a * &a.transpose()) + &Matrix::identity(n).scale(0.5)
}

fn sym<T: Scalar>(m: &Matrix<f64>) -> SymMatrix<T> {
    SymMatrix::symmetrize(&m.cast())
}

/// Random strictly feasible problem of dimension `n` with an initial
/// point, seeded by `seed`.
pub fn random_feasible<T: Scalar>(n: usize, seed: u64) -> Result<SdpProblem<T>> {
    random_feasible_with(&SynthOptions::new(n), seed)
}

pub fn random_feasible_with<T: Scalar>(opts: &SynthOptions, seed: u64) -> Result<SdpProblem<T>> {
    let n = opts.n;
    if n == 0 {
        return Err(Error::InvalidOption("n must be at least 1".into()));
    }
    let (lo, hi) = opts.gap_range;
    if !(lo > 0.0 && lo <= hi) {
        return Err(Error::InvalidOption(format!("bad gap range ({lo}, {hi})")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = packed_len(n);

    let z0: SymMatrix<f64> = sym(&random_spd(&mut rng, n));
    let gap = if lo == hi { lo } else { rng.gen_range(lo..hi) };
    let mu = gap / n as f64;
    let mut e = random_sym(&mut rng, n);
    let shift = e.trace() / n as f64;
    e = &e - &Matrix::identity(n).scale(shift);
    let norm = e.frobenius();
    if norm > 0.0 {
        e = e.scale(CENTERING * mu * rng.gen_range(0.0..1.0) / norm);
    }
    let zhi = sym_inv(&sym_sqrt(&z0)?)?;
    let center = &Matrix::identity(n).scale(mu) + &e;
    let x0: SymMatrix<f64> = sym(&(zhi.as_matrix() * &(&center * zhi.as_matrix())));

    let constraints = loop {
        let fs: Vec<SymMatrix<f64>> = (0..m).map(|_| sym(&random_sym(&mut rng, n))).collect();
        let mut fmat = Matrix::zeros(m, m);
        for (i, fi) in fs.iter().enumerate() {
            for (k, &v) in crate::symvec::vecs(fi).as_slice().iter().enumerate() {
                fmat[(i, k)] = v;
            }
        }
        let svd = Svd::new(&fmat);
        if svd.rank() == m && svd.condition_number() < MAX_CONDITION {
            break fs;
        }
    };
    let b: Vec<f64> = constraints
        .iter()
        .map(|fi| {
            -(fi.as_matrix().as_slice().iter())
                .zip(z0.as_matrix().as_slice())
                .map(|(a, b)| a * b)
                .sum::<f64>()
        })
        .collect();
    let f0: SymMatrix<f64> = sym(&random_spd(&mut rng, n));

    let cast = |s: &SymMatrix<f64>| s.cast::<T>();
    let prob = SdpProblem::new(
        cast(&f0),
        constraints.iter().map(cast).collect(),
        b.into_iter().map(T::lit).collect(),
    )?
    .with_initial_point(cast(&x0))?
    .with_epsilon(T::lit(opts.epsilon));
    Ok(prob)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::duality_gap;
    use crate::solver::{initialize, SolverOptions};

    #[test]
    fn deterministic_for_seed() {
        let a = random_feasible::<f64>(3, 7).unwrap();
        let b = random_feasible::<f64>(3, 7).unwrap();
        assert_eq!(a.fingerprint(), b.fingerprint());
        let c = random_feasible::<f64>(3, 8).unwrap();
        assert_ne!(a.fingerprint(), c.fingerprint());
    }

    #[test]
    fn initial_point_is_centered_and_feasible() {
        for n in 1..=4 {
            let prob = random_feasible::<f64>(n, 11).unwrap();
            assert_eq!(prob.m(), packed_len(n));
            let s = initialize(&prob, None, &SolverOptions::for_problem(&prob).unwrap()).unwrap();
            let g = duality_gap(&s.x, &s.z);
            assert!(g > 0.0 && g <= 0.1, "gap {g}");
        }
    }
}
