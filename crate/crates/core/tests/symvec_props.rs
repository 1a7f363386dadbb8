#![allow(clippy::needless_range_loop)]

use credible_sdp::symvec::{dimension_from_len, index_pairs, packed_len};
use credible_sdp::{krons, mats, smat, svec, vecs, Matrix, SymMatrix};
use proptest::prelude::*;

const SQRT2: f64 = std::f64::consts::SQRT_2;

// Oracle: direct entry-by-entry packing, written independently of the crate.
fn vecs_oracle(m: &[Vec<f64>]) -> Vec<f64> {
    let n = m.len();
    let mut out = Vec::new();
    for i in 0..n {
        for j in i..n {
            out.push(if i == j { m[i][j] } else { SQRT2 * m[i][j] });
        }
    }
    out
}

fn matmul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let k = b.len();
    let c = b[0].len();
    (0..n)
        .map(|i| {
            (0..c)
                .map(|j| (0..k).map(|l| a[i][l] * b[l][j]).sum())
                .collect()
        })
        .collect()
}

fn transpose(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    (0..a[0].len())
        .map(|j| (0..a.len()).map(|i| a[i][j]).collect())
        .collect()
}

fn max_rel_err(a: &[f64], b: &[f64]) -> f64 {
    let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    a.iter()
        .zip(b)
        .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
        / scale
}

fn sym_rows(n: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(-10.0f64..10.0, n * n).prop_map(move |v| {
        let mut m = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                m[i][j] = 0.5 * (v[i * n + j] + v[j * n + i]);
            }
        }
        m
    })
}

fn square_rows(n: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(-3.0f64..3.0, n * n)
        .prop_map(move |v| v.chunks(n).map(<[f64]>::to_vec).collect())
}

type Rows = Vec<Vec<f64>>;

fn sym_and_square() -> impl Strategy<Value = (Rows, Rows, Rows)> {
    (1usize..=5).prop_flat_map(|n| (sym_rows(n), square_rows(n), square_rows(n)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn vecs_matches_direct_packing(m in (1usize..=6).prop_flat_map(sym_rows)) {
        let s = SymMatrix::from_rows(&m).unwrap();
        let v = vecs(&s);
        prop_assert_eq!(v.as_slice().len(), packed_len(m.len()));
        prop_assert!(max_rel_err(v.as_slice(), &vecs_oracle(&m)) < 1e-15);
    }

    #[test]
    fn vecs_mats_roundtrip(m in (1usize..=6).prop_flat_map(sym_rows)) {
        let s = SymMatrix::from_rows(&m).unwrap();
        let back = mats(vecs(&s).as_slice(), m.len()).unwrap();
        prop_assert!(max_rel_err(back.as_matrix().as_slice(), s.as_matrix().as_slice()) < 1e-15);
    }

    #[test]
    fn svec_smat_roundtrip(m in (1usize..=6).prop_flat_map(sym_rows)) {
        let s = SymMatrix::from_rows(&m).unwrap();
        let v = svec(&s);
        let back = smat(v.as_slice(), m.len()).unwrap();
        prop_assert!(max_rel_err(back.as_matrix().as_slice(), s.as_matrix().as_slice()) < 1e-15);
        for (k, (i, j)) in index_pairs(m.len()).into_iter().enumerate() {
            let expect = if i == j { m[i][j] } else { 2.0 * m[i][j] };
            prop_assert_eq!(v.as_slice()[k], expect);
        }
    }

    #[test]
    fn trace_isometry((a, b) in (1usize..=6).prop_flat_map(|n| (sym_rows(n), sym_rows(n)))) {
        let sa = SymMatrix::from_rows(&a).unwrap();
        let sb = SymMatrix::from_rows(&b).unwrap();
        let inner: f64 = vecs(&sa).as_slice().iter().zip(vecs(&sb).as_slice()).map(|(x, y)| x * y).sum();
        let ab = matmul(&a, &b);
        let tr: f64 = (0..a.len()).map(|i| ab[i][i]).sum();
        prop_assert!((inner - tr).abs() <= 1e-12 * tr.abs().max(1.0));
    }

    #[test]
    fn krons_defining_identity((m, q1, q2) in sym_and_square()) {
        let n = m.len();
        let k = krons(
            &Matrix::from_rows(&q1).unwrap(),
            &Matrix::from_rows(&q2).unwrap(),
        ).unwrap();
        prop_assert_eq!((k.rows(), k.cols()), (packed_len(n), packed_len(n)));
        let lhs = k.matvec(&vecs_oracle(&m)).unwrap();
        let a = matmul(&matmul(&q1, &m), &transpose(&q2));
        let b = matmul(&matmul(&q2, &m), &transpose(&q1));
        let half: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| 0.5 * (a[i][j] + b[i][j])).collect()).collect();
        prop_assert!(max_rel_err(&lhs, &vecs_oracle(&half)) < 1e-12);
    }

    #[test]
    fn krons_is_symmetric_in_its_arguments((_, q1, q2) in sym_and_square()) {
        let a = Matrix::from_rows(&q1).unwrap();
        let b = Matrix::from_rows(&q2).unwrap();
        let k12 = krons(&a, &b).unwrap();
        let k21 = krons(&b, &a).unwrap();
        prop_assert!(max_rel_err(k12.as_slice(), k21.as_slice()) < 1e-14);
    }
}

#[test]
fn smat_of_small_vector() {
    let s = smat(&[0.4, -0.2, 0.2], 2).unwrap();
    assert_eq!(s.to_rows(), vec![vec![0.4, -0.1], vec![-0.1, 0.2]]);
}

#[test]
fn ordering_is_row_major_upper_triangle() {
    assert_eq!(
        index_pairs(3),
        vec![(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)]
    );
    assert_eq!(dimension_from_len(6), Some(3));
    assert_eq!(dimension_from_len(5), None);
    assert!(mats(&[1.0, 2.0], 2).is_err());
}

#[test]
fn krons_of_identity_is_identity() {
    let i3 = Matrix::<f64>::identity(3);
    let k = krons(&i3, &i3).unwrap();
    assert!((&k - &Matrix::identity(6)).max_abs() < 1e-15);
}
