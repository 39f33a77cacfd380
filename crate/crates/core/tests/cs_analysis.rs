mod common;

use common::*;
use hse_core::analysis::{
    coherence, diagnose, nsp_coefficient, rip_constant, spark_exact, spark_lower_bound, SparkBound,
};
use hse_core::linalg::normalize_columns;
use hse_core::recovery::l0_oracle;
use hse_core::Error;
use itertools::Itertools;
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::Rng;

const SQRT_HALF: f64 = std::f64::consts::FRAC_1_SQRT_2;

fn small() -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 3, &[1.0, 0.0, 1.0, 0.0, 1.0, 1.0])
}

fn duplicated() -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 3, &[1.0, 1.0, 0.0, 2.0, 2.0, 1.0])
}

#[test]
fn coherence_examples() {
    assert_eq!(coherence(&DMatrix::<f64>::identity(4, 4)).unwrap(), 0.0);
    assert!((coherence(&duplicated()).unwrap() - 1.0).abs() < 1e-15);
    assert!((coherence(&small()).unwrap() - SQRT_HALF).abs() < 1e-15);
}

#[test]
fn coherence_of_complex_columns() {
    let h = DMatrix::from_row_slice(2, 2, &[C::new(1.0, 0.0), C::new(0.0, 1.0), C::new(0.0, 0.0), C::new(0.0, 1.0)]);
    assert!((coherence(&h).unwrap() - SQRT_HALF).abs() < 1e-15);
}

#[test]
fn coherence_rejects_zero_column() {
    let h = DMatrix::from_row_slice(2, 3, &[1.0, 0.0, 1.0, 0.0, 0.0, 1.0]);
    let err = coherence(&h).unwrap_err();
    assert!(matches!(err, Error::Argument(_)));
    assert!(err.to_string().contains('1'), "{err}");
}

#[test]
fn spark_examples() {
    assert_eq!(spark_exact(&DMatrix::<f64>::identity(3, 3), 3).unwrap(), None);
    assert_eq!(spark_exact(&duplicated(), 3).unwrap(), Some(2));
    assert_eq!(spark_exact(&small(), 3).unwrap(), Some(3));
}

#[test]
fn spark_bound_examples() {
    match spark_lower_bound(&small()).unwrap() {
        SparkBound::Finite(b) => assert!((b - (1.0 + 2f64.sqrt())).abs() < 1e-12),
        SparkBound::Infinite => panic!("finite bound expected"),
    }
    assert_eq!(spark_lower_bound(&DMatrix::<f64>::identity(3, 3)).unwrap(), SparkBound::Infinite);
    let b = spark_lower_bound(&duplicated()).unwrap().value().unwrap();
    assert!((b - 2.0).abs() < 1e-12);
}

#[test]
fn spark_guard_refuses_huge_searches() {
    let h = gaussian_matrix(&mut rng(1), 40, 60);
    assert!(matches!(spark_exact(&h, 30), Err(Error::Refused(_))));
}

#[test]
fn nsp_examples() {
    assert_eq!(nsp_coefficient(&DMatrix::<f64>::identity(3, 3), 1).unwrap(), 0.0);
    let ones = DMatrix::from_row_slice(1, 2, &[1.0f64, 1.0]);
    assert!((nsp_coefficient(&ones, 1).unwrap() - 1.0).abs() < 1e-12);
    let ramp = DMatrix::from_row_slice(1, 2, &[1.0f64, 2.0]);
    assert!((nsp_coefficient(&ramp, 1).unwrap() - 2.0).abs() < 1e-12);
}

#[test]
fn nsp_matches_closed_form_on_one_dimensional_null_space() {
    let h = small();
    // null space spanned by (1, 1, -1)
    assert!((nsp_coefficient(&h, 1).unwrap() - 0.5).abs() < 1e-12);
    assert!((nsp_coefficient(&h, 2).unwrap() - 2.0).abs() < 1e-12);
}

#[test]
fn rip_examples() {
    for k in 1..=4 {
        assert!(rip_constant(&DMatrix::<f64>::identity(4, 4), k).unwrap().abs() < 1e-14);
    }
    let h = gaussian_matrix(&mut rng(2), 5, 8);
    assert!(rip_constant(&h, 1).unwrap() < 1e-12);
    assert!((rip_constant(&small(), 2).unwrap() - SQRT_HALF).abs() < 1e-12);
    assert!(matches!(rip_constant(&small(), 4), Err(Error::Argument(_))));
}

#[test]
fn diagnostics_bundle() {
    let d = diagnose(&small(), Some(3)).unwrap();
    assert_eq!(d.spark_exact, Some(3));
    assert_eq!(d.rank, 2);
    assert!(d.spark_exact.unwrap() <= d.rank + 1);
    assert!(d.spark_lower_bound.value().unwrap() <= 3.0);
}

fn random_small(r: &mut rand_chacha::ChaCha8Rng) -> DMatrix<f64> {
    let m = r.random_range(1..=5);
    let n = r.random_range(2..=7);
    DMatrix::from_fn(m, n, |_, _| r.random_range(-2i32..=2) as f64)
}

#[test]
fn spark_bound_never_exceeds_exact_spark() {
    let mut r = rng(2024);
    let mut checked = 0;
    while checked < 500 {
        let h = random_small(&mut r);
        let Ok(bound) = spark_lower_bound(&h) else { continue };
        if let Some(s) = spark_exact(&h, h.ncols()).unwrap() {
            assert!(!bound.exceeds(s as f64 + 1e-9), "bound {bound:?} > spark {s} for {h}");
        }
        checked += 1;
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn rip_is_monotone_in_k(seed in any::<u64>(), m in 2usize..6, n in 3usize..8) {
        let h = gaussian_matrix(&mut rng(seed), m, n);
        let deltas: Vec<f64> = (1..=n).map(|k| rip_constant(&h, k).unwrap()).collect();
        for w in deltas.windows(2) {
            prop_assert!(w[1] >= w[0] - 1e-12);
        }
    }

    #[test]
    fn restricted_isometry_band_holds(seed in any::<u64>()) {
        let mut r = rng(seed);
        let k = 2;
        let (h, _) = normalize_columns(&gaussian_matrix(&mut r, 6, 9));
        let delta = rip_constant(&h, 2 * k).unwrap();
        for _ in 0..20 {
            let d = sparse_vector(&mut r, 9, k) - sparse_vector(&mut r, 9, k);
            let e = (&h * &d).norm_squared();
            let n2 = d.norm_squared();
            prop_assert!(e <= (1.0 + delta) * n2 + 1e-10);
            prop_assert!(e >= (1.0 - delta) * n2 - 1e-10);
        }
    }
}

#[test]
fn unique_sparsest_solution_when_spark_exceeds_2k() {
    let mut r = rng(77);
    let mut done = 0;
    while done < 60 {
        let k = r.random_range(1..=2);
        let m = r.random_range(2 * k..=6);
        let n = r.random_range(m + 1..=9);
        let h = gaussian_matrix(&mut r, m, n);
        let spark = spark_exact(&h, n).unwrap().unwrap_or(usize::MAX);
        if spark <= 2 * k {
            continue;
        }
        let x = sparse_vector(&mut r, n, k);
        let y = &h * &x;
        let res = l0_oracle(&h, &y, k).unwrap();
        assert!((&res.x_hat - &x).amax() < 1e-8);
        // no other support of size <= k explains y
        let truth: Vec<usize> = (0..n).filter(|&i| x[i] != 0.0).collect();
        for s in 1..=k {
            for cols in (0..n).combinations(s) {
                if cols == truth {
                    continue;
                }
                let sub = h.select_columns(cols.iter());
                let ls = sub.clone().svd(true, true).solve(&y, 1e-12).unwrap();
                let resid = (&y - &sub * ls).norm();
                assert!(resid > 1e-8 * y.norm(), "second explanation {cols:?}");
            }
        }
        done += 1;
    }
}

#[test]
fn single_precision_coherence() {
    let h = DMatrix::from_row_slice(2, 3, &[1.0f32, 0.0, 1.0, 0.0, 1.0, 1.0]);
    assert!((coherence(&h).unwrap() - std::f32::consts::FRAC_1_SQRT_2).abs() < 1e-6);
    assert_eq!(spark_exact(&h, 3).unwrap(), Some(3));
}
