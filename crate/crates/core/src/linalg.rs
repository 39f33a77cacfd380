//! Small dense linear-algebra helpers built on nalgebra.

use nalgebra::{Complex, DMatrix, DVector};

use crate::scalar::Real;

/// Relative singular-value tolerance used for rank and dependence decisions.
pub const RANK_REL_TOL: f64 = 1e-10;

pub(crate) fn rank_tol<T: Real>() -> T {
    // f32 cannot resolve 1e-10 relative gaps
    T::lit(RANK_REL_TOL).max(T::machine_eps() * T::lit(100.0))
}

#[derive(Debug, Clone)]
pub struct LeastSquares<T: Real> {
    pub x: DVector<T>,
    /// Condition number of the system exceeded what the scalar type resolves.
    pub ill_conditioned: bool,
}

/// Minimum-norm least-squares solution of `a x = b` through the SVD.
pub fn lstsq<T: Real>(a: &DMatrix<T>, b: &DVector<T>) -> LeastSquares<T> {
    let n = a.ncols();
    if n == 0 || a.nrows() == 0 {
        return LeastSquares { x: DVector::zeros(n), ill_conditioned: false };
    }
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let cutoff = smax * T::machine_eps() * T::lit(a.nrows().max(n) as f64);
    let x = svd.solve(b, cutoff).unwrap_or_else(|_| DVector::zeros(n));
    let ill_conditioned = smax == T::zero() || smin < smax * T::machine_eps().powf(T::lit(0.75));
    LeastSquares { x, ill_conditioned }
}

/// Singular values in decreasing order.
pub fn singular_values<T: Real>(a: &DMatrix<T>) -> DVector<T> {
    if a.is_empty() {
        return DVector::zeros(0);
    }
    let mut s: Vec<T> = a.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|x, y| y.partial_cmp(x).unwrap_or(std::cmp::Ordering::Equal));
    DVector::from_vec(s)
}

/// Numerical rank with singular values below `rel_tol * sigma_max` treated as zero.
pub fn rank<T: Real>(a: &DMatrix<T>, rel_tol: T) -> usize {
    let s = singular_values(a);
    if s.is_empty() || s[0] == T::zero() {
        return 0;
    }
    let cut = s[0] * rel_tol;
    s.iter().filter(|&&v| v > cut).count()
}

pub fn spectral_norm<T: Real>(a: &DMatrix<T>) -> T {
    singular_values(a).iter().copied().next().unwrap_or_else(T::zero)
}

/// Orthonormal basis (as columns) of the null space of `a`.
pub fn null_space<T: Real>(a: &DMatrix<T>, rel_tol: T) -> DMatrix<T> {
    let (m, n) = a.shape();
    if n == 0 {
        return DMatrix::zeros(0, 0);
    }
    // pad to square so the SVD yields a full set of right singular vectors
    let mut padded = DMatrix::zeros(m.max(n), n);
    padded.rows_mut(0, m).copy_from(a);
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("requested right singular vectors");
    let smax = svd.singular_values.max();
    let cut = smax * rel_tol;
    let cols: Vec<DVector<T>> = svd
        .singular_values
        .iter()
        .enumerate()
        .filter(|(_, &s)| smax == T::zero() || s <= cut)
        .map(|(i, _)| v_t.row(i).transpose())
        .collect();
    if cols.is_empty() {
        DMatrix::zeros(n, 0)
    } else {
        DMatrix::from_columns(&cols)
    }
}

/// Column-normalized copy of `a` together with the original column norms.
pub fn normalize_columns<T: Real>(a: &DMatrix<T>) -> (DMatrix<T>, Vec<T>) {
    let mut out = a.clone();
    let mut norms = Vec::with_capacity(a.ncols());
    for mut col in out.column_iter_mut() {
        let nrm = col.norm();
        if nrm > T::zero() {
            col /= nrm;
        }
        norms.push(nrm);
    }
    (out, norms)
}

/// Numerical rank of a complex matrix by Gaussian elimination with complete pivoting.
pub fn complex_rank<T: Real>(a: &DMatrix<Complex<T>>, rel_tol: T) -> usize {
    let (m, n) = a.shape();
    let mut w = a.clone();
    let data = w.as_mut_slice();
    let mut first_pivot = T::zero();
    let mut rank = 0;
    let mut factors = vec![Complex::new(T::zero(), T::zero()); m];
    for step in 0..m.min(n) {
        let mut best = (step, step, T::zero());
        for j in step..n {
            for (i, z) in data[j * m + step..(j + 1) * m].iter().enumerate() {
                let v = z.re * z.re + z.im * z.im;
                if v > best.2 {
                    best = (step + i, j, v);
                }
            }
        }
        let pivot_abs = best.2.sqrt();
        if step == 0 {
            first_pivot = pivot_abs;
        }
        if pivot_abs == T::zero() || pivot_abs <= first_pivot * rel_tol {
            break;
        }
        if best.1 != step {
            for i in 0..m {
                data.swap(step * m + i, best.1 * m + i);
            }
        }
        if best.0 != step {
            for j in step..n {
                data.swap(j * m + step, j * m + best.0);
            }
        }
        let pivot = data[step * m + step];
        for i in step + 1..m {
            factors[i] = data[step * m + i] / pivot;
        }
        for j in step..n {
            let col = &mut data[j * m..(j + 1) * m];
            let t = col[step];
            for i in step + 1..m {
                col[i] -= factors[i] * t;
            }
        }
        rank += 1;
    }
    rank
}

pub fn l1_norm<T: Real>(v: &DVector<T>) -> T {
    v.iter().fold(T::zero(), |acc, x| acc + x.abs())
}

pub fn linf_norm<T: Real>(v: &DVector<T>) -> T {
    v.iter().fold(T::zero(), |acc, x| acc.max(x.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn null_space_of_row_vector() {
        let a = DMatrix::<f64>::from_row_slice(1, 2, &[1.0, 1.0]);
        let ns = null_space(&a, 1e-10);
        assert_eq!(ns.ncols(), 1);
        let v = ns.column(0);
        assert!((v[0] + v[1]).abs() < 1e-12);
        assert!((v.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn full_rank_has_trivial_null_space() {
        let a = DMatrix::<f64>::identity(3, 3);
        assert_eq!(null_space(&a, 1e-10).ncols(), 0);
        assert_eq!(rank(&a, 1e-10), 3);
    }

    #[test]
    fn complex_rank_detects_duplicate_rows() {
        let c = |re: f64, im: f64| Complex::new(re, im);
        let a = DMatrix::from_row_slice(
            3,
            3,
            &[
                c(1.0, 1.0),
                c(2.0, 0.0),
                c(0.0, 3.0),
                c(1.0, 1.0),
                c(2.0, 0.0),
                c(0.0, 3.0),
                c(0.5, 0.0),
                c(1.0, -1.0),
                c(4.0, 0.0),
            ],
        );
        assert_eq!(complex_rank(&a, 1e-10), 2);
        assert_eq!(complex_rank(&DMatrix::<Complex<f64>>::identity(4, 6), 1e-10), 4);
    }

    #[test]
    fn lstsq_matches_exact_solution() {
        let a = DMatrix::<f64>::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        let b = DVector::<f64>::from_vec(vec![1.0, 2.0, 3.0]);
        let ls = lstsq(&a, &b);
        assert!((ls.x[0] - 1.0).abs() < 1e-12 && (ls.x[1] - 2.0).abs() < 1e-12);
        assert!(!ls.ill_conditioned);
    }
}
