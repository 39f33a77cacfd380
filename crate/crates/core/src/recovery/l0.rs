use itertools::Itertools;
use nalgebra::{DMatrix, DVector};

use super::{check_dims, RecoveryResult, SolverKind};
use crate::analysis::binomial;
use crate::error::{Error, Result};
use crate::linalg::lstsq;
use crate::scalar::Real;

/// Total number of supports the exhaustive search may visit.
pub const L0_MAX_SUBSETS: u128 = 10_000_000;

/// Exhaustive sparsest-solution search over supports of size `0..=k_max`.
///
/// A support is accepted when its least-squares fit leaves `|y - H x| <= 1e-8 |y|`.
pub fn l0_oracle<T: Real>(h: &DMatrix<T>, y: &DVector<T>, k_max: usize) -> Result<RecoveryResult<T>> {
    check_dims(h, y)?;
    let n = h.ncols();
    let k_max = k_max.min(n);
    let total: u128 = (0..=k_max).map(|s| binomial(n, s)).fold(0u128, |a, b| a.saturating_add(b));
    if total > L0_MAX_SUBSETS {
        return Err(Error::Refused(format!("exhaustive L0 search over {total} supports exceeds {L0_MAX_SUBSETS}")));
    }
    let ynorm = y.norm();
    let tol = T::lit(1e-8) * ynorm;
    let mut visited = 0usize;
    if ynorm == T::zero() {
        return Ok(RecoveryResult::new(h, y, DVector::zeros(n), SolverKind::L0Oracle, 0, true, T::zero()));
    }
    for s in 1..=k_max {
        for cols in (0..n).combinations(s) {
            visited += 1;
            let sub = h.select_columns(cols.iter());
            let fit = lstsq(&sub, y).x;
            if (y - &sub * &fit).norm() <= tol {
                let mut x = DVector::zeros(n);
                for (k, &c) in cols.iter().enumerate() {
                    x[c] = fit[k];
                }
                return Ok(RecoveryResult::new(h, y, x, SolverKind::L0Oracle, visited, true, T::lit(s as f64)));
            }
        }
    }
    let mut r = RecoveryResult::new(h, y, DVector::zeros(n), SolverKind::L0Oracle, visited, false, T::zero());
    r.objective_value = T::lit(f64::NAN);
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_single_spike() {
        let h = DMatrix::<f64>::identity(3, 3);
        let y = DVector::from_vec(vec![0.0, 2.0, 0.0]);
        let r = l0_oracle(&h, &y, 3).unwrap();
        assert!((r.x_hat - DVector::from_vec(vec![0.0, 2.0, 0.0])).amax() < 1e-12);
        assert_eq!(r.objective_value, 1.0);
    }

    #[test]
    fn zero_measurements_give_empty_support() {
        let h = DMatrix::<f64>::identity(3, 3);
        let r = l0_oracle(&h, &DVector::zeros(3), 2).unwrap();
        assert_eq!(r.objective_value, 0.0);
        assert!(r.x_hat.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn reports_non_convergence_beyond_k_max() {
        let h = DMatrix::<f64>::identity(3, 3);
        let y = DVector::from_vec(vec![1.0, 1.0, 1.0]);
        let r = l0_oracle(&h, &y, 2).unwrap();
        assert!(!r.converged);
    }
}
