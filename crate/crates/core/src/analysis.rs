//! Compressive-sensing matrix properties: coherence, spark, NSP and RIP constants.
//!
//! Spark, NSP and RIP are combinatorial; they are only meant for small matrices.

use itertools::Itertools;
use nalgebra::{ComplexField, DMatrix, DVector, SymmetricEigen};
use num_traits::Zero;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, rank_tol};
use crate::scalar::Real;

/// Largest subset count any exhaustive search will enumerate.
pub const MAX_SUBSETS: u128 = 10_000_000;

/// Default number of random null-space directions sampled by [`nsp_coefficient`].
pub const NSP_SAMPLES: usize = 10_000;

/// Mutual coherence: `max_{i != j} |<h_i, h_j>| / (|h_i| |h_j|)`.
pub fn coherence<N: ComplexField>(h: &DMatrix<N>) -> Result<N::RealField> {
    let n = h.ncols();
    if n < 2 {
        return Err(Error::Argument(format!("coherence needs at least 2 columns, got {n}")));
    }
    let norms: Vec<N::RealField> = h.column_iter().map(|c| c.norm()).collect();
    if let Some(j) = norms.iter().position(|v| *v == N::RealField::zero()) {
        return Err(Error::Argument(format!("column {j} is zero")));
    }
    let mut mu = N::RealField::zero();
    for i in 0..n {
        for j in i + 1..n {
            let ip = h.column(i).dotc(&h.column(j)).modulus();
            let c = ip / (norms[i].clone() * norms[j].clone());
            if c > mu {
                mu = c;
            }
        }
    }
    Ok(mu)
}

pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc > u64::MAX as u128 {
            return u128::MAX;
        }
    }
    acc
}

/// Smallest number of linearly dependent columns, searched up to `max_cols`.
///
/// Returns `Ok(None)` when every subset of at most `max_cols` columns is independent.
pub fn spark_exact<T: Real>(h: &DMatrix<T>, max_cols: usize) -> Result<Option<usize>> {
    let n = h.ncols();
    let max_cols = max_cols.min(n);
    if binomial(n, max_cols) > MAX_SUBSETS {
        return Err(Error::Refused(format!("spark search over C({n}, {max_cols}) subsets exceeds {MAX_SUBSETS}")));
    }
    let (normalized, norms) = linalg::normalize_columns(h);
    if norms.iter().any(|v| *v == T::zero()) {
        return Ok((max_cols >= 1).then_some(1));
    }
    let full_rank = linalg::rank(&normalized, rank_tol::<T>());
    let tol = rank_tol::<T>();
    for s in 2..=max_cols {
        if s > full_rank {
            return Ok(Some(s));
        }
        let dependent = (0..n).combinations(s).any(|cols| {
            let sub = normalized.select_columns(cols.iter());
            linalg::rank(&sub, tol) < s
        });
        if dependent {
            return Ok(Some(s));
        }
    }
    Ok(None)
}

/// Lower bound on the spark implied by the coherence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum SparkBound<T> {
    /// `1 + 1/mu`.
    Finite(T),
    /// Columns are mutually orthogonal (`mu = 0`).
    Infinite,
}

impl<T: Real> SparkBound<T> {
    pub fn exceeds(&self, value: T) -> bool {
        match self {
            SparkBound::Finite(b) => *b > value,
            SparkBound::Infinite => true,
        }
    }

    pub fn value(&self) -> Option<T> {
        match self {
            SparkBound::Finite(b) => Some(*b),
            SparkBound::Infinite => None,
        }
    }
}

pub fn spark_bound_from_coherence<T: Real>(mu: T) -> SparkBound<T> {
    if mu == T::zero() {
        SparkBound::Infinite
    } else {
        SparkBound::Finite(T::one() + T::one() / mu)
    }
}

pub fn spark_lower_bound<T: Real>(h: &DMatrix<T>) -> Result<SparkBound<T>> {
    coherence(h).map(spark_bound_from_coherence)
}

/// Null-space-property coefficient of order `k` with the default sampling.
pub fn nsp_coefficient<T: Real>(h: &DMatrix<T>, k: usize) -> Result<T> {
    nsp_coefficient_sampled(h, k, NSP_SAMPLES, 0x005e_ed5a)
}

/// Estimate of the smallest `C` with `|v_S|_1 <= C |v_{S^c}|_1` for every null vector `v`
/// and every support `|S| = k`.
///
/// The supremum is taken over the null-space basis vectors and `samples` random unit
/// directions, so it is a lower estimate; for a one-dimensional null space it is exact.
/// A k-sparse null vector makes the coefficient infinite.
pub fn nsp_coefficient_sampled<T: Real>(h: &DMatrix<T>, k: usize, samples: usize, seed: u64) -> Result<T> {
    let n = h.ncols();
    if k > n {
        return Err(Error::Argument(format!("NSP order {k} exceeds column count {n}")));
    }
    let basis = linalg::null_space(h, rank_tol::<T>());
    let d = basis.ncols();
    if d == 0 || k == 0 {
        return Ok(T::zero());
    }
    let ratio = |v: DVector<T>| -> T {
        let mut mags: Vec<T> = v.iter().map(|x| x.abs()).collect();
        mags.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
        let head = mags[..k].iter().fold(T::zero(), |a, &b| a + b);
        let tail = mags[k..].iter().fold(T::zero(), |a, &b| a + b);
        let scale = head + tail;
        if tail <= scale * T::machine_eps() * T::lit(n as f64) {
            T::infinity()
        } else {
            head / tail
        }
    };
    let mut best = T::zero();
    for j in 0..d {
        best = best.max(ratio(basis.column(j).into_owned()));
    }
    if d > 1 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..samples {
            let c = DVector::from_fn(d, |_, _| {
                let z: f64 = StandardNormal.sample(&mut rng);
                T::lit(z)
            });
            best = best.max(ratio(&basis * c));
        }
    }
    Ok(best)
}

/// Restricted isometry constant `delta_k` of the column-normalized matrix.
pub fn rip_constant<T: Real>(h: &DMatrix<T>, k: usize) -> Result<T> {
    let n = h.ncols();
    if k > n {
        return Err(Error::Argument(format!("RIP order {k} exceeds column count {n}")));
    }
    if k == 0 {
        return Ok(T::zero());
    }
    if binomial(n, k) > MAX_SUBSETS {
        return Err(Error::Refused(format!("RIP search over C({n}, {k}) subsets exceeds {MAX_SUBSETS}")));
    }
    let (normalized, _) = linalg::normalize_columns(h);
    let gram = normalized.transpose() * &normalized;
    let mut delta = T::zero();
    for cols in (0..n).combinations(k) {
        let sub = DMatrix::from_fn(k, k, |a, b| gram[(cols[a], cols[b])]);
        let eig = SymmetricEigen::new(sub).eigenvalues;
        let lmax = eig.max();
        let lmin = eig.min();
        delta = delta.max((lmax - T::one()).abs()).max((T::one() - lmin).abs());
    }
    Ok(delta)
}

#[derive(Debug, Clone, Serialize)]
pub struct MatrixDiagnostics<T> {
    pub coherence: T,
    pub spark_lower_bound: SparkBound<T>,
    pub spark_exact: Option<usize>,
    pub rank: usize,
}

/// Coherence, rank and spark bound; the exact spark only when `max_spark_cols` is given
/// and the subset count is within the guard.
pub fn diagnose<T: Real>(h: &DMatrix<T>, max_spark_cols: Option<usize>) -> Result<MatrixDiagnostics<T>> {
    let mu = coherence(h)?;
    let spark = match max_spark_cols {
        Some(c) => match spark_exact(h, c) {
            Ok(s) => s,
            Err(Error::Refused(_)) => None,
            Err(e) => return Err(e),
        },
        None => None,
    };
    Ok(MatrixDiagnostics {
        coherence: mu,
        spark_lower_bound: spark_bound_from_coherence(mu),
        spark_exact: spark,
        rank: linalg::rank(h, rank_tol::<T>()),
    })
}
