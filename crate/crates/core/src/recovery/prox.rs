//! Proximal-gradient LASSO and the basis-pursuit-denoising path built on it.

use nalgebra::{DMatrix, DVector};

use super::{bp_lp, check_dims, RecoveryResult, SolverConfig, SolverKind};
use crate::error::{Error, Result};
use crate::linalg::{l1_norm, linf_norm, lstsq, spectral_norm};
use crate::scalar::Real;

pub fn soft_threshold<T: Real>(v: T, t: T) -> T {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        T::zero()
    }
}

fn lasso_objective<T: Real>(h: &DMatrix<T>, y: &DVector<T>, x: &DVector<T>, lambda: T) -> T {
    (y - h * x).norm_squared() + lambda * l1_norm(x)
}

struct LassoRun<T: Real> {
    x: DVector<T>,
    iterations: usize,
    converged: bool,
}

/// Iterations between attempts to solve the LASSO exactly on the current support.
const POLISH_EVERY: usize = 25;

/// Exact minimizer for the support and signs of `x`, if it satisfies the optimality
/// conditions: `H_S^T H_S x_S = H_S^T y - (lambda/2) sign(x_S)` with signs preserved and
/// `|2 H_j^T (y - H x)| <= lambda` off the support.
fn polish<T: Real>(h: &DMatrix<T>, y: &DVector<T>, lambda: T, x: &DVector<T>) -> Option<DVector<T>> {
    let support: Vec<usize> = (0..x.len()).filter(|&i| x[i] != T::zero()).collect();
    if support.is_empty() || support.len() > h.nrows() {
        return None;
    }
    let hs = h.select_columns(&support);
    let half = lambda / T::lit(2.0);
    let rhs = hs.tr_mul(y) - DVector::from_fn(support.len(), |i, _| x[support[i]].signum() * half);
    let xs = hs.tr_mul(&hs).cholesky()?.solve(&rhs);
    if support.iter().zip(xs.iter()).any(|(&j, v)| *v * x[j].signum() <= T::zero()) {
        return None;
    }
    let mut out = DVector::zeros(x.len());
    for (&j, v) in support.iter().zip(xs.iter()) {
        out[j] = *v;
    }
    let corr = h.tr_mul(&(y - h * &out)) * T::lit(2.0);
    let slack = lambda * (T::one() + T::lit(1e-9)) + T::machine_eps() * T::lit(100.0) * corr.amax().max(T::one());
    let on_support = |j: usize| out[j] != T::zero();
    if (0..x.len()).any(|j| !on_support(j) && corr[j].abs() > slack) {
        return None;
    }
    Some(out)
}

/// Monotone FISTA on `|y - Hx|^2 + lambda |x|_1` starting from `x0`, with momentum
/// restarted whenever a step fails to decrease the objective.
#[allow(clippy::too_many_arguments)]
fn lasso_iterate<T: Real>(
    h: &DMatrix<T>,
    y: &DVector<T>,
    lambda: T,
    lipschitz: T,
    x0: DVector<T>,
    max_iterations: usize,
    tol: T,
    mut trace: Option<&mut Vec<T>>,
) -> LassoRun<T> {
    let n = h.ncols();
    let step = T::one() / lipschitz;
    let thresh = lambda * step;
    let two = T::lit(2.0);
    let objective = |hv: &DVector<T>, v: &DVector<T>| (y - hv).norm_squared() + lambda * l1_norm(v);

    let mut x = x0;
    let mut hx = h * &x;
    let mut fx = objective(&hx, &x);
    if let Some(t) = trace.as_deref_mut() {
        t.push(fx);
    }
    let mut z = x.clone();
    let mut hz = hx.clone();
    let mut t = T::one();
    for it in 1..=max_iterations {
        // gradient of the quadratic term: 2 H^T (H z - y)
        let grad = h.tr_mul(&(&hz - y)) * two;
        let u = DVector::from_fn(n, |i, _| soft_threshold(z[i] - step * grad[i], thresh));
        let hu = h * &u;
        let fu = objective(&hu, &u);
        let moved = (&u - &z).norm();
        let (x_prev, hx_prev) = (x.clone(), hx.clone());
        if fu <= fx {
            x = u.clone();
            hx = hu.clone();
            fx = fu;
            let t_next = (T::one() + (T::one() + T::lit(4.0) * t * t).sqrt()) / two;
            let beta = (t - T::one()) / t_next;
            z = &x + (&x - &x_prev) * beta;
            hz = &hx + (&hx - &hx_prev) * beta;
            t = t_next;
        } else {
            z = x.clone();
            hz = hx.clone();
            t = T::one();
        }
        if let Some(tr) = trace.as_deref_mut() {
            tr.push(fx);
        }
        let scale = T::one().max(x.norm());
        if moved <= tol * scale {
            return LassoRun { x, iterations: it, converged: true };
        }
        if it % POLISH_EVERY == 0 && lambda > T::zero() {
            if let Some(p) = polish(h, y, lambda, &x) {
                let hp = h * &p;
                let fp = objective(&hp, &p);
                if fp <= fx {
                    if let Some(tr) = trace.as_deref_mut() {
                        *tr.last_mut().expect("trace has the initial value") = fp;
                    }
                    return LassoRun { x: p, iterations: it, converged: true };
                }
            }
        }
    }
    LassoRun { x, iterations: max_iterations, converged: false }
}

fn lipschitz<T: Real>(h: &DMatrix<T>) -> T {
    let s = spectral_norm(h);
    (T::lit(2.0) * s * s).max(T::machine_eps())
}

/// LASSO by proximal gradient with soft-thresholding.
///
/// `lambda = 0` is solved directly as minimum-norm least squares.
pub fn lasso<T: Real>(h: &DMatrix<T>, y: &DVector<T>, lambda: T, cfg: &SolverConfig<T>) -> Result<RecoveryResult<T>> {
    lasso_traced(h, y, lambda, cfg, None)
}

/// [`lasso`] that also records the objective after every iteration.
pub fn lasso_traced<T: Real>(
    h: &DMatrix<T>,
    y: &DVector<T>,
    lambda: T,
    cfg: &SolverConfig<T>,
    trace: Option<&mut Vec<T>>,
) -> Result<RecoveryResult<T>> {
    check_dims(h, y)?;
    if !(lambda >= T::zero()) {
        return Err(Error::Argument("lambda must be >= 0".into()));
    }
    if lambda == T::zero() {
        let ls = lstsq(h, y);
        let obj = lasso_objective(h, y, &ls.x, lambda);
        let mut r = RecoveryResult::new(h, y, ls.x, SolverKind::Lasso, 1, true, obj);
        r.ill_conditioned = ls.ill_conditioned;
        return Ok(r);
    }
    if T::lit(2.0) * linf_norm(&h.tr_mul(y)) <= lambda * (T::one() + T::lit(64.0) * T::machine_eps()) {
        let x = DVector::zeros(h.ncols());
        let obj = lasso_objective(h, y, &x, lambda);
        if let Some(t) = trace {
            t.push(obj);
        }
        return Ok(RecoveryResult::new(h, y, x, SolverKind::Lasso, 0, true, obj));
    }
    let run = lasso_iterate(
        h,
        y,
        lambda,
        lipschitz(h),
        DVector::zeros(h.ncols()),
        cfg.max_iterations,
        cfg.convergence_tol,
        trace,
    );
    let obj = lasso_objective(h, y, &run.x, lambda);
    Ok(RecoveryResult::new(h, y, run.x, SolverKind::Lasso, run.iterations, run.converged, obj))
}

/// Residual tolerance of the BPDN bisection.
pub const BPDN_RESIDUAL_TOL: f64 = 1e-6;

/// Basis pursuit denoising, `min |x|_1` s.t. `|y - H x|_2 <= epsilon`.
///
/// Solved on the LASSO path. The path is followed exactly by homotopy (breakpoint to
/// breakpoint, re-solving the active set at each one) and stopped where the residual
/// reaches `epsilon`. If the homotopy breaks down (singular active set, step cap), a
/// bracketed search on `log lambda` over proximal LASSO solves takes over until the
/// residual equals `epsilon` within [`BPDN_RESIDUAL_TOL`]. The returned point is always
/// on the feasible side. `epsilon = 0` is the equality-constrained problem and goes
/// to the simplex.
pub fn bpdn<T: Real>(h: &DMatrix<T>, y: &DVector<T>, epsilon: T, cfg: &SolverConfig<T>) -> Result<RecoveryResult<T>> {
    check_dims(h, y)?;
    if !(epsilon >= T::zero()) {
        return Err(Error::Argument("epsilon must be >= 0".into()));
    }
    let n = h.ncols();
    let ynorm = y.norm();
    if epsilon >= ynorm {
        return Ok(RecoveryResult::new(h, y, DVector::zeros(n), SolverKind::Bpdn, 0, true, T::zero()));
    }
    if epsilon == T::zero() {
        let mut r = bp_lp(h, y)?;
        r.solver = SolverKind::Bpdn;
        return Ok(r);
    }
    let ls = lstsq(h, y);
    let min_residual = (y - h * &ls.x).norm();
    if epsilon < min_residual {
        return Err(Error::Infeasible(format!(
            "epsilon {} is below the least-squares residual {}",
            epsilon.as_f64(),
            min_residual.as_f64()
        )));
    }

    if let Some((x, steps)) = homotopy_to_residual(h, y, epsilon, cfg.max_iterations) {
        let res = (y - h * &x).norm();
        if (res - epsilon).abs() <= T::lit(BPDN_RESIDUAL_TOL) {
            let obj = l1_norm(&x);
            return Ok(RecoveryResult::new(h, y, x, SolverKind::Bpdn, steps, true, obj));
        }
    }
    lambda_search(h, y, epsilon, ynorm, cfg)
}

/// Bracketed search on `log lambda` over warm-started proximal LASSO solves.
fn lambda_search<T: Real>(
    h: &DMatrix<T>,
    y: &DVector<T>,
    epsilon: T,
    ynorm: T,
    cfg: &SolverConfig<T>,
) -> Result<RecoveryResult<T>> {
    let n = h.ncols();
    let tol_res = T::lit(BPDN_RESIDUAL_TOL);
    let inner_tol = cfg.convergence_tol.min(T::lit(1e-10)).max(T::machine_eps() * T::lit(10.0));
    let lip = lipschitz(h);
    let lambda_max = T::lit(2.0) * linf_norm(&(h.transpose() * y));
    let solve_at =
        |lambda: T, x0: DVector<T>| lasso_iterate(h, y, lambda, lip, x0, cfg.max_iterations, inner_tol, None);

    // feasible low end: shrink lambda until the residual drops below epsilon
    let mut hi = lambda_max;
    let mut lo = lambda_max;
    let mut x_lo = DVector::zeros(n);
    let mut total_iters = 0usize;
    let mut found_lo = false;
    for _ in 0..40 {
        lo *= T::lit(0.1);
        let run = solve_at(lo, x_lo.clone());
        total_iters += run.iterations;
        x_lo = run.x;
        if (y - h * &x_lo).norm() <= epsilon {
            found_lo = true;
            break;
        }
        hi = lo;
    }
    if !found_lo {
        let obj = l1_norm(&x_lo);
        return Ok(RecoveryResult::new(h, y, x_lo, SolverKind::Bpdn, total_iters, false, obj));
    }

    // bracketed root search on log(lambda) for residual(lambda) = epsilon (Illinois)
    let mut g_lo = (y - h * &x_lo).norm() - epsilon;
    let mut g_hi =
        if hi == lambda_max { ynorm - epsilon } else { (y - h * &solve_at(hi, x_lo.clone()).x).norm() - epsilon };
    let mut best = x_lo.clone();
    let mut converged = false;
    let mut warm = x_lo;
    let mut side = 0i8;
    for round in 0..200 {
        let (a, b) = (lo.ln(), hi.ln());
        let mut mid =
            if round % 4 == 3 || g_hi <= g_lo { (a + b) / T::lit(2.0) } else { b - g_hi * (b - a) / (g_hi - g_lo) };
        let width = b - a;
        if !(mid > a + width * T::lit(1e-3) && mid < b - width * T::lit(1e-3)) {
            mid = (a + b) / T::lit(2.0);
        }
        let mid = mid.exp();
        let run = solve_at(mid, warm.clone());
        total_iters += run.iterations;
        let g = (y - h * &run.x).norm() - epsilon;
        if g <= T::zero() {
            lo = mid;
            g_lo = g;
            best = run.x.clone();
            if -g <= tol_res {
                converged = run.converged;
                break;
            }
            if side == -1 {
                g_hi /= T::lit(2.0);
            }
            side = -1;
        } else {
            hi = mid;
            g_hi = g;
            if side == 1 {
                g_lo /= T::lit(2.0);
            }
            side = 1;
        }
        warm = run.x;
        if (hi - lo) <= lo * T::machine_eps() * T::lit(4.0) {
            break;
        }
    }
    let obj = l1_norm(&best);
    Ok(RecoveryResult::new(h, y, best, SolverKind::Bpdn, total_iters, converged, obj))
}

/// Follows the LASSO path `min 1/2 |y - Hx|^2 + g |x|_1` from `g = |H^T y|_inf` down
/// until `|y - Hx|_2 = epsilon`. Returns the point and the number of breakpoints.
fn homotopy_to_residual<T: Real>(
    h: &DMatrix<T>,
    y: &DVector<T>,
    epsilon: T,
    max_steps: usize,
) -> Option<(DVector<T>, usize)> {
    let n = h.ncols();
    let mut x = DVector::zeros(n);
    let c0 = h.tr_mul(y);
    let mut gamma = c0.amax();
    if gamma == T::zero() {
        return None;
    }
    let mut active: Vec<usize> = vec![c0.iamax()];
    let mut signs: Vec<T> = vec![c0[active[0]].signum()];
    let tiny = T::machine_eps() * T::lit(1e3);
    for step in 1..=max_steps {
        let ha = h.select_columns(&active);
        let chol = ha.tr_mul(&ha).cholesky()?;
        let s = DVector::from_vec(signs.clone());
        // exact point on the path at the current gamma, then the direction d(x_A)/d(-gamma)
        let xa = chol.solve(&(ha.tr_mul(y) - &s * gamma));
        let da = chol.solve(&s);
        for (k, &j) in active.iter().enumerate() {
            x[j] = xa[k];
        }
        let r = y - &ha * &xa;
        let u = &ha * &da;
        let c = h.tr_mul(&r);
        let a = h.tr_mul(&u);

        let mut delta = gamma;
        let mut event: Option<(usize, bool)> = None;
        for j in (0..n).filter(|j| !active.contains(j)) {
            for cand in [(gamma - c[j]) / (T::one() - a[j]), (gamma + c[j]) / (T::one() + a[j])] {
                if cand > tiny * gamma && cand < delta {
                    delta = cand;
                    event = Some((j, true));
                }
            }
        }
        for (k, &j) in active.iter().enumerate() {
            if da[k] != T::zero() {
                let cand = -xa[k] / da[k];
                if cand > tiny * gamma && cand < delta {
                    delta = cand;
                    event = Some((j, false));
                }
            }
        }

        // |r - t u|^2 = epsilon^2 for the smallest t in [0, delta]
        let uu = u.norm_squared();
        let ru = r.dot(&u);
        let rr = r.norm_squared();
        if uu > T::zero() {
            let disc = ru * ru - uu * (rr - epsilon * epsilon);
            if disc >= T::zero() {
                let t = (ru - disc.sqrt()) / uu;
                if t >= T::zero() && t <= delta {
                    let g = gamma - t;
                    let xa = chol.solve(&(ha.tr_mul(y) - &s * g));
                    x.fill(T::zero());
                    for (k, &j) in active.iter().enumerate() {
                        x[j] = xa[k];
                    }
                    return Some((x, step));
                }
            }
        }
        gamma -= delta;
        if gamma <= T::zero() {
            return None;
        }
        match event {
            Some((j, true)) => {
                let cj = c[j] - delta * a[j];
                active.push(j);
                signs.push(cj.signum());
            }
            Some((j, false)) => {
                let k = active.iter().position(|&v| v == j).expect("leaving index is active");
                active.remove(k);
                signs.remove(k);
                x[j] = T::zero();
            }
            None => return None,
        }
        if active.len() > h.nrows() {
            return None;
        }
    }
    None
}
