use nalgebra::{DMatrix, DVector};

use super::simplex::{self, LinearProgram};
use super::{check_dims, BoundNorm, RecoveryResult, SolverKind};
use crate::error::{Error, Result};
use crate::linalg::l1_norm;
use crate::scalar::Real;

/// `[A, -A]`, the split-variable image of `A` for `x = x+ - x-`.
fn split<T: Real>(a: &DMatrix<T>) -> DMatrix<T> {
    let (m, n) = a.shape();
    let mut out = DMatrix::zeros(m, 2 * n);
    out.columns_mut(0, n).copy_from(a);
    out.columns_mut(n, n).copy_from(&(-a));
    out
}

fn merge<T: Real>(u: &DVector<T>, n: usize) -> DVector<T> {
    DVector::from_fn(n, |i, _| u[i] - u[n + i])
}

fn vstack<T: Real>(top: &DMatrix<T>, bottom: &DMatrix<T>) -> DMatrix<T> {
    let mut out = DMatrix::zeros(top.nrows() + bottom.nrows(), top.ncols());
    out.rows_mut(0, top.nrows()).copy_from(top);
    out.rows_mut(top.nrows(), bottom.nrows()).copy_from(bottom);
    out
}

fn concat<T: Real>(a: &DVector<T>, b: &DVector<T>) -> DVector<T> {
    DVector::from_iterator(a.len() + b.len(), a.iter().chain(b.iter()).copied())
}

fn finish<T: Real>(
    h: &DMatrix<T>,
    y: &DVector<T>,
    u: &DVector<T>,
    pivots: usize,
    solver: SolverKind,
) -> RecoveryResult<T> {
    let x = merge(u, h.ncols());
    let obj = l1_norm(&x);
    RecoveryResult::new(h, y, x, solver, pivots, true, obj)
}

/// Basis pursuit: `min |x|_1` subject to `H x = y`, as an LP over `x = x+ - x-`.
pub fn bp_lp<T: Real>(h: &DMatrix<T>, y: &DVector<T>) -> Result<RecoveryResult<T>> {
    check_dims(h, y)?;
    let n = h.ncols();
    let lp = LinearProgram::equality(DVector::from_element(2 * n, T::one()), split(h), y.clone());
    let sol = simplex::solve(&lp).map_err(|e| match e {
        Error::Infeasible(_) => Error::Infeasible("measurements are not in the range of H".into()),
        other => other,
    })?;
    Ok(finish(h, y, &sol.x, sol.pivots, SolverKind::BasisPursuit))
}

/// `min |x|_1` subject to `|y - H x|_p <= epsilon` for `p` in {1, inf}.
pub fn bp_noisy<T: Real>(h: &DMatrix<T>, y: &DVector<T>, epsilon: T, bound: BoundNorm) -> Result<RecoveryResult<T>> {
    check_dims(h, y)?;
    if !(epsilon >= T::zero()) {
        return Err(Error::Argument("epsilon must be >= 0".into()));
    }
    let kind = match bound {
        BoundNorm::L1 => SolverKind::BpNoisyL1,
        BoundNorm::Linf => SolverKind::BpNoisyLinf,
    };
    if epsilon == T::zero() {
        let mut r = bp_lp(h, y)?;
        r.solver = kind;
        return Ok(r);
    }
    let (m, n) = h.shape();
    let hs = split(h);
    let lp = match bound {
        BoundNorm::Linf => {
            let a = vstack(&hs, &(-&hs));
            let eps = DVector::from_element(m, epsilon);
            let b = concat(&(y + &eps), &(eps - y));
            LinearProgram::inequality(DVector::from_element(2 * n, T::one()), a, b)
        }
        BoundNorm::L1 => {
            // variables [x+, x-, t]: -t <= y - Hx <= t, sum t <= epsilon
            let mut a = DMatrix::zeros(2 * m + 1, 2 * n + m);
            a.view_mut((0, 0), (m, 2 * n)).copy_from(&hs);
            a.view_mut((m, 0), (m, 2 * n)).copy_from(&(-&hs));
            for i in 0..m {
                a[(i, 2 * n + i)] = -T::one();
                a[(m + i, 2 * n + i)] = -T::one();
                a[(2 * m, 2 * n + i)] = T::one();
            }
            let mut b = DVector::zeros(2 * m + 1);
            b.rows_mut(0, m).copy_from(y);
            b.rows_mut(m, m).copy_from(&(-y));
            b[2 * m] = epsilon;
            let mut c = DVector::zeros(2 * n + m);
            c.rows_mut(0, 2 * n).fill(T::one());
            LinearProgram::inequality(c, a, b)
        }
    };
    let sol = simplex::solve(&lp)?;
    let u = sol.x.rows(0, 2 * n).into_owned();
    Ok(finish(h, y, &u, sol.pivots, kind))
}

/// Dantzig selector: `min |x|_1` subject to `|H^T (y - H x)|_inf <= epsilon`.
pub fn dantzig<T: Real>(h: &DMatrix<T>, y: &DVector<T>, epsilon: T) -> Result<RecoveryResult<T>> {
    check_dims(h, y)?;
    if !(epsilon >= T::zero()) {
        return Err(Error::Argument("epsilon must be >= 0".into()));
    }
    let n = h.ncols();
    let gram = h.transpose() * h;
    let corr = h.transpose() * y;
    let gs = split(&gram);
    let a = vstack(&gs, &(-&gs));
    let eps = DVector::from_element(n, epsilon);
    let b = concat(&(&corr + &eps), &(eps - &corr));
    let lp = LinearProgram::inequality(DVector::from_element(2 * n, T::one()), a, b);
    let sol = simplex::solve(&lp)?;
    Ok(finish(h, y, &sol.x, sol.pivots, SolverKind::Dantzig))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bp_identity_is_exact() {
        let h = DMatrix::<f64>::identity(3, 3);
        let y = DVector::<f64>::from_vec(vec![1.5, -2.0, 0.0]);
        let r = bp_lp(&h, &y).unwrap();
        assert!((r.x_hat - &y).norm() < 1e-12);
        assert!((r.objective_value - 3.5).abs() < 1e-12);
    }

    #[test]
    fn bp_tie_returns_an_optimum() {
        let h = DMatrix::<f64>::from_row_slice(1, 2, &[1.0, 1.0]);
        let y = DVector::<f64>::from_vec(vec![2.0]);
        let r = bp_lp(&h, &y).unwrap();
        assert!((r.objective_value - 2.0).abs() < 1e-12);
        assert!(r.residual_l2 < 1e-12);
    }

    #[test]
    fn bp_out_of_range_is_infeasible() {
        let h = DMatrix::<f64>::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let y = DVector::<f64>::from_vec(vec![1.0, 2.0]);
        assert!(matches!(bp_lp(&h, &y), Err(Error::Infeasible(_))));
    }

    #[test]
    fn bp_noisy_origin_when_bound_is_loose() {
        let h = DMatrix::<f64>::from_row_slice(2, 3, &[1.0, 0.5, 0.2, -0.3, 1.0, 0.7]);
        let y = DVector::<f64>::from_vec(vec![0.3, -0.4]);
        for (bound, eps) in [(BoundNorm::L1, 0.7), (BoundNorm::Linf, 0.4)] {
            let r = bp_noisy(&h, &y, eps, bound).unwrap();
            assert!(r.x_hat.norm() < 1e-12, "{bound:?}");
        }
    }

    #[test]
    fn dantzig_loose_bound_gives_zero() {
        let h = DMatrix::<f64>::from_row_slice(2, 2, &[2.0, 1.0, 0.0, 1.0]);
        let y = DVector::<f64>::from_vec(vec![1.0, 1.0]);
        let bound = (h.transpose() * &y).amax();
        let r = dantzig(&h, &y, bound).unwrap();
        assert!(r.x_hat.norm() < 1e-12);
    }
}
