//! Greedy pursuit: OMP, CoSaMP and iterative hard thresholding.

use nalgebra::{DMatrix, DVector};

use super::{check_dims, RecoveryResult, SolverConfig, SolverKind};
use crate::error::{Error, Result};
use crate::linalg::{self, lstsq, spectral_norm};
use crate::scalar::Real;

/// Least squares restricted to `support`, scattered back to a length-`n` vector.
fn fit_support<T: Real>(h: &DMatrix<T>, y: &DVector<T>, support: &[usize]) -> (DVector<T>, bool) {
    let mut x = DVector::zeros(h.ncols());
    if support.is_empty() {
        return (x, false);
    }
    let sub = h.select_columns(support.iter());
    let ls = lstsq(&sub, y);
    for (k, &c) in support.iter().enumerate() {
        x[c] = ls.x[k];
    }
    (x, ls.ill_conditioned)
}

/// Indices of the `k` largest magnitudes, ties to the lower index.
fn top_k<T: Real>(v: &DVector<T>, k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[b].abs().partial_cmp(&v[a].abs()).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b)));
    idx.truncate(k);
    idx.sort_unstable();
    idx
}

fn normalized_correlations<T: Real>(ht_normalized: &DMatrix<T>, r: &DVector<T>) -> DVector<T> {
    ht_normalized * r
}

fn check_columns<T: Real>(norms: &[T]) -> Result<()> {
    match norms.iter().position(|v| *v == T::zero()) {
        Some(j) => Err(Error::Argument(format!("column {j} of the sensing matrix is zero"))),
        None => Ok(()),
    }
}

/// Orthogonal matching pursuit with at most `k` atoms.
pub fn omp<T: Real>(h: &DMatrix<T>, y: &DVector<T>, k: usize, cfg: &SolverConfig<T>) -> Result<RecoveryResult<T>> {
    check_dims(h, y)?;
    let (m, n) = h.shape();
    if k > m.min(n) {
        return Err(Error::Argument(format!("OMP sparsity {k} exceeds min(m, n) = {}", m.min(n))));
    }
    let (hn, norms) = linalg::normalize_columns(h);
    check_columns(&norms)?;
    let hnt = hn.transpose();
    let ynorm = y.norm();
    let stop = cfg.convergence_tol * ynorm;

    let mut support: Vec<usize> = Vec::with_capacity(k);
    let mut x = DVector::zeros(n);
    let mut residual = y.clone();
    let mut ill = false;
    let mut iterations = 0;
    while support.len() < k && residual.norm() > stop && ynorm > T::zero() {
        let corr = normalized_correlations(&hnt, &residual);
        let pick = (0..n).filter(|j| !support.contains(j)).max_by(|&a, &b| {
            corr[a].abs().partial_cmp(&corr[b].abs()).unwrap_or(std::cmp::Ordering::Equal).then(b.cmp(&a))
        });
        let Some(j) = pick else { break };
        support.push(j);
        let (fit, flag) = fit_support(h, y, &support);
        ill |= flag;
        x = fit;
        residual = y - h * &x;
        iterations += 1;
    }
    let converged = residual.norm() <= stop || support.len() == k;
    let obj = linalg::l1_norm(&x);
    let mut r = RecoveryResult::new(h, y, x, SolverKind::Omp, iterations, converged, obj);
    r.ill_conditioned = ill;
    Ok(r)
}

/// Compressive sampling matching pursuit with target sparsity `k` (`3k <= m`).
pub fn cosamp<T: Real>(h: &DMatrix<T>, y: &DVector<T>, k: usize, cfg: &SolverConfig<T>) -> Result<RecoveryResult<T>> {
    check_dims(h, y)?;
    let (m, n) = h.shape();
    if 3 * k > m {
        return Err(Error::Argument(format!("CoSaMP needs 3k <= m, got k = {k}, m = {m}")));
    }
    let (hn, norms) = linalg::normalize_columns(h);
    check_columns(&norms)?;
    let hnt = hn.transpose();
    let ynorm = y.norm();
    let stop = cfg.convergence_tol * ynorm;

    let mut x = DVector::zeros(n);
    let mut res_norm = ynorm;
    let mut ill = false;
    let mut iterations = 0;
    let mut converged = ynorm == T::zero() || k == 0;
    while !converged && iterations < cfg.max_iterations {
        iterations += 1;
        let residual = y - h * &x;
        let proxy = normalized_correlations(&hnt, &residual);
        let mut merged = top_k(&proxy, (2 * k).min(n));
        for (j, v) in x.iter().enumerate() {
            if *v != T::zero() && !merged.contains(&j) {
                merged.push(j);
            }
        }
        merged.sort_unstable();
        let (b, flag) = fit_support(h, y, &merged);
        ill |= flag;
        // prune in the normalized-column scale
        let scaled = DVector::from_fn(n, |j, _| b[j] * norms[j]);
        let support = top_k(&scaled, k);
        let (next, flag) = fit_support(h, y, &support);
        ill |= flag;
        let next_res = (y - h * &next).norm();
        let stagnated = (res_norm - next_res).abs() <= cfg.convergence_tol * res_norm.max(T::machine_eps());
        if next_res <= res_norm {
            x = next;
            res_norm = next_res;
        }
        converged = res_norm <= stop || stagnated;
    }
    let obj = linalg::l1_norm(&x);
    let mut r = RecoveryResult::new(h, y, x, SolverKind::Cosamp, iterations, converged, obj);
    r.ill_conditioned = ill;
    Ok(r)
}

fn hard_threshold<T: Real>(v: &DVector<T>, k: usize) -> DVector<T> {
    let keep = top_k(v, k);
    let mut out = DVector::zeros(v.len());
    for j in keep {
        out[j] = v[j];
    }
    out
}

fn support_of<T: Real>(x: &DVector<T>) -> Vec<usize> {
    (0..x.len()).filter(|&j| x[j] != T::zero()).collect()
}

/// Iterative hard thresholding, `x <- H_k(x + mu H^T (y - H x))`.
///
/// The step `mu` is the exact line-search step along the gradient restricted to the
/// current support (normalized IHT), halved while a support change would break
/// `mu <= 0.99 |dx|^2 / |H dx|^2`. This makes the iteration invariant to the scale of
/// `H`. Returns the iterate with the smallest residual.
pub fn iht<T: Real>(h: &DMatrix<T>, y: &DVector<T>, k: usize, cfg: &SolverConfig<T>) -> Result<RecoveryResult<T>> {
    check_dims(h, y)?;
    let n = h.ncols();
    let k = k.min(n);
    if spectral_norm(h) == T::zero() {
        return Err(Error::Argument("sensing matrix is zero".into()));
    }
    let ht = h.transpose();
    let shrink = T::lit(0.99);

    let mut x = DVector::zeros(n);
    let mut support = top_k(&(&ht * y), k);
    let mut best = x.clone();
    let mut best_res = y.norm();
    let mut iterations = 0;
    let mut converged = best_res == T::zero() || k == 0;
    while !converged && iterations < cfg.max_iterations {
        iterations += 1;
        let g = &ht * (y - h * &x);
        let mut gs = DVector::zeros(n);
        for &j in &support {
            gs[j] = g[j];
        }
        let hg = (h * &gs).norm_squared();
        let mut mu = if hg > T::zero() { gs.norm_squared() / hg } else { T::one() };
        let mut next = hard_threshold(&(&x + &g * mu), k);
        let mut next_support = support_of(&next);
        if next_support != support {
            for _ in 0..60 {
                let d = &next - &x;
                let w = (h * &d).norm_squared();
                if w == T::zero() || mu <= shrink * d.norm_squared() / w {
                    break;
                }
                mu /= T::lit(2.0);
                next = hard_threshold(&(&x + &g * mu), k);
                next_support = support_of(&next);
            }
        }
        let moved = (&next - &x).norm();
        x = next;
        support = next_support;
        let res = (y - h * &x).norm();
        if res < best_res {
            best_res = res;
            best = x.clone();
        }
        converged = moved <= cfg.convergence_tol * T::one().max(x.norm());
    }
    let obj = linalg::l1_norm(&best);
    Ok(RecoveryResult::new(h, y, best, SolverKind::Iht, iterations, converged, obj))
}
