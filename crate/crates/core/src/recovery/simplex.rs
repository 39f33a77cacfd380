//! Dense two-phase primal simplex.
//!
//! Pricing is Dantzig's rule. A run of degenerate pivots first shifts the basic values
//! by small deterministic amounts (removed again once optimal); a second run switches
//! to Bland's anti-cycling rule. The tableau is periodically rebuilt from the original data.
//!
//! Solves `min c^T x` subject to `A_eq x = b_eq`, `A_ub x <= b_ub`, `x >= 0`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone)]
pub struct LinearProgram<T: Real> {
    pub c: DVector<T>,
    pub a_eq: DMatrix<T>,
    pub b_eq: DVector<T>,
    pub a_ub: DMatrix<T>,
    pub b_ub: DVector<T>,
}

impl<T: Real> LinearProgram<T> {
    pub fn n_vars(&self) -> usize {
        self.c.len()
    }

    /// Program with only equality rows.
    pub fn equality(c: DVector<T>, a_eq: DMatrix<T>, b_eq: DVector<T>) -> Self {
        let n = c.len();
        LinearProgram { c, a_eq, b_eq, a_ub: DMatrix::zeros(0, n), b_ub: DVector::zeros(0) }
    }

    /// Program with only inequality rows.
    pub fn inequality(c: DVector<T>, a_ub: DMatrix<T>, b_ub: DVector<T>) -> Self {
        let n = c.len();
        LinearProgram { c, a_eq: DMatrix::zeros(0, n), b_eq: DVector::zeros(0), a_ub, b_ub }
    }

    fn check(&self) -> Result<()> {
        let n = self.c.len();
        if self.a_eq.ncols() != n || self.a_ub.ncols() != n {
            return Err(Error::Argument("LP constraint matrices disagree with cost length".into()));
        }
        if self.a_eq.nrows() != self.b_eq.len() || self.a_ub.nrows() != self.b_ub.len() {
            return Err(Error::Argument("LP right-hand sides disagree with constraint rows".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct LpSolution<T: Real> {
    pub x: DVector<T>,
    pub objective: T,
    pub pivots: usize,
}

/// Consecutive degenerate pivots after which pricing switches to Bland's rule.
const DEGENERATE_STREAK: usize = 30;
/// Pivots between refactorizations of the tableau from the original data.
const REINVERT_EVERY: usize = 100;

struct Tableau<T: Real> {
    rows: usize,
    cols: usize,
    /// `rows + 1` rows of `cols + 1` entries; the last row holds reduced costs,
    /// the last column the right-hand side.
    data: Vec<T>,
    basis: Vec<usize>,
    /// Original `[A | artificials]` and right-hand side, for refactorization.
    a: DMatrix<T>,
    b: DVector<T>,
    cost: Vec<T>,
    /// Unshifted right-hand side while a degeneracy shift is active.
    original_b: Option<DVector<T>>,
    shifts: usize,
}

struct Tolerances<T> {
    pivot: T,
    optimality: T,
    feasibility: T,
    shift: T,
}

impl<T: Real> Tableau<T> {
    #[inline]
    fn at(&self, i: usize, j: usize) -> T {
        self.data[i * (self.cols + 1) + j]
    }

    #[inline]
    fn rhs(&self, i: usize) -> T {
        self.at(i, self.cols)
    }

    fn pivot(&mut self, r: usize, q: usize) {
        let w = self.cols + 1;
        let p = self.at(r, q);
        for j in 0..w {
            self.data[r * w + j] /= p;
        }
        let (before, rest) = self.data.split_at_mut(r * w);
        let (prow, after) = rest.split_at_mut(w);
        for row in before.chunks_mut(w).chain(after.chunks_mut(w)) {
            let f = row[q];
            if f == T::zero() {
                continue;
            }
            for (x, &pv) in row.iter_mut().zip(prow.iter()) {
                *x -= f * pv;
            }
            row[q] = T::zero();
        }
        self.basis[r] = q;
    }

    /// Rebuilds `B^-1 [A | b]` and the reduced costs for the current basis.
    fn reinvert(&mut self) {
        let (m, w) = (self.rows, self.cols + 1);
        if m == 0 {
            return;
        }
        let bmat = DMatrix::from_fn(m, m, |i, j| self.a[(i, self.basis[j])]);
        let mut rhs = DMatrix::<T>::zeros(m, w);
        rhs.columns_mut(0, self.cols).copy_from(&self.a);
        rhs.column_mut(self.cols).copy_from(&self.b);
        let Some(sol) = bmat.lu().solve(&rhs) else { return };
        if sol.iter().any(|v| !v.is_finite_value()) {
            return;
        }
        for i in 0..m {
            for j in 0..w {
                self.data[i * w + j] = sol[(i, j)];
            }
            for (k, &bj) in self.basis.iter().enumerate() {
                self.data[i * w + bj] = if k == i { T::one() } else { T::zero() };
            }
        }
        self.price();
    }

    /// Raises every basic value by a distinct amount of order `size` by moving `b` to `b + B delta`.
    fn shift(&mut self, size: T) {
        let m = self.rows;
        if self.original_b.is_none() {
            self.original_b = Some(self.b.clone());
        }
        let mut state = 0x9e37_79b9_7f4a_7c15u64 ^ (self.shifts as u64).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        let delta: Vec<T> = (0..m)
            .map(|_| {
                state ^= state << 13;
                state ^= state >> 7;
                state ^= state << 17;
                size * T::lit(1.0 + (state >> 11) as f64 / (1u64 << 53) as f64)
            })
            .collect();
        for (k, &bj) in self.basis.iter().enumerate() {
            for i in 0..m {
                self.b[i] += self.a[(i, bj)] * delta[k];
            }
        }
        self.shifts += 1;
        self.reinvert();
    }

    /// Restores the unshifted right-hand side; reduced costs are unaffected.
    fn unshift(&mut self) {
        if let Some(b) = self.original_b.take() {
            self.b = b;
            self.reinvert();
        }
    }

    /// Recomputes the objective row from `cost` and the current tableau rows.
    fn price(&mut self) {
        let (m, w) = (self.rows, self.cols + 1);
        for j in 0..w {
            self.data[m * w + j] = if j < self.cols { self.cost[j] } else { T::zero() };
        }
        for i in 0..m {
            let cb = self.cost[self.basis[i]];
            if cb != T::zero() {
                for j in 0..w {
                    let v = self.data[i * w + j];
                    self.data[m * w + j] -= cb * v;
                }
            }
        }
    }

    /// Dantzig pricing with a Harris ratio test. Degenerate streaks trigger a shift of
    /// the basic values, and Bland's rule if the stall persists.
    fn run(&mut self, allowed: &[bool], tol: &Tolerances<T>, pivots: &mut usize, limit: usize) -> Result<()> {
        let result = self.iterate(allowed, tol, pivots, limit);
        self.unshift();
        result
    }

    fn iterate(&mut self, allowed: &[bool], tol: &Tolerances<T>, pivots: &mut usize, limit: usize) -> Result<()> {
        let obj = self.rows;
        let mut streak = 0usize;
        let mut since_reinvert = 0usize;
        let mut shifted_this_run = false;
        loop {
            if streak == DEGENERATE_STREAK && !shifted_this_run {
                self.shift(tol.shift);
                shifted_this_run = true;
                since_reinvert = 0;
                streak = 0;
            }
            let bland = streak >= DEGENERATE_STREAK;
            let entering = if bland {
                (0..self.cols).find(|&j| allowed[j] && self.at(obj, j) < -tol.optimality)
            } else {
                let mut best: Option<(usize, T)> = None;
                for j in (0..self.cols).filter(|&j| allowed[j]) {
                    let d = self.at(obj, j);
                    if d < -tol.optimality && best.is_none_or(|(_, bd)| d < bd) {
                        best = Some((j, d));
                    }
                }
                best.map(|(j, _)| j)
            };
            let Some(q) = entering else { return Ok(()) };

            let mut bound: Option<T> = None;
            for i in 0..self.rows {
                let a = self.at(i, q);
                if a > tol.pivot {
                    let r = (self.rhs(i).max(T::zero()) + tol.feasibility) / a;
                    bound = Some(bound.map_or(r, |b: T| b.min(r)));
                }
            }
            let Some(bound) = bound else {
                if since_reinvert > 0 {
                    self.reinvert();
                    since_reinvert = 0;
                    continue;
                }
                return Err(Error::Internal("linear program is unbounded".into()));
            };
            let mut leave: Option<(usize, T, T)> = None;
            for i in 0..self.rows {
                let a = self.at(i, q);
                if a > tol.pivot {
                    let ratio = self.rhs(i).max(T::zero()) / a;
                    if ratio > bound {
                        continue;
                    }
                    let better = match leave {
                        None => true,
                        Some((bi, br, ba)) => {
                            if bland {
                                ratio < br || (ratio == br && self.basis[i] < self.basis[bi])
                            } else {
                                a > ba
                            }
                        }
                    };
                    if better {
                        leave = Some((i, ratio, a));
                    }
                }
            }
            let (r, step, _) = leave.expect("bound implies a candidate row");
            self.pivot(r, q);
            for i in 0..self.rows {
                let idx = i * (self.cols + 1) + self.cols;
                if self.data[idx] < T::zero() {
                    self.data[idx] = T::zero();
                }
            }
            streak = if step <= tol.feasibility { streak + 1 } else { 0 };
            *pivots += 1;
            since_reinvert += 1;
            if since_reinvert >= REINVERT_EVERY {
                self.reinvert();
                since_reinvert = 0;
            }
            if *pivots > limit {
                return Err(Error::Internal(format!("simplex exceeded {limit} pivots")));
            }
        }
    }
}

/// Solves the program, returning an optimal vertex.
pub fn solve<T: Real>(lp: &LinearProgram<T>) -> Result<LpSolution<T>> {
    lp.check()?;
    let n = lp.n_vars();
    let m_eq = lp.a_eq.nrows();
    let m_ub = lp.a_ub.nrows();
    let m = m_eq + m_ub;

    // columns: [original n | slacks m_ub | artificials m]
    let n_struct = n + m_ub;
    let cols = n_struct + m;
    let w = cols + 1;
    let mut a_full = DMatrix::<T>::zeros(m, n_struct);
    let mut b = DVector::<T>::zeros(m);
    for i in 0..m_eq {
        a_full.view_mut((i, 0), (1, n)).copy_from(&lp.a_eq.row(i));
        b[i] = lp.b_eq[i];
    }
    for i in 0..m_ub {
        a_full.view_mut((m_eq + i, 0), (1, n)).copy_from(&lp.a_ub.row(i));
        a_full[(m_eq + i, n + i)] = T::one();
        b[m_eq + i] = lp.b_ub[i];
    }
    // equilibrate rows of the structural part (slack columns stay unit)
    for i in 0..m {
        let s = (0..n).fold(T::zero(), |acc, j| acc.max(a_full[(i, j)].abs()));
        if s > T::zero() && i < m_eq {
            a_full.row_mut(i).unscale_mut(s);
            b[i] /= s;
        }
        if b[i] < T::zero() {
            b[i] = -b[i];
            a_full.row_mut(i).neg_mut();
        }
    }

    let scale = a_full.iter().fold(T::one(), |acc, v| acc.max(v.abs()));
    let bscale = b.iter().fold(T::one(), |acc, v| acc.max(v.abs()));
    let cscale = lp.c.iter().fold(T::one(), |acc, v| acc.max(v.abs()));
    let eps = T::machine_eps();
    let tol = Tolerances {
        pivot: eps.powf(T::lit(0.6)) * scale,
        optimality: eps.powf(T::lit(0.75)) * cscale,
        feasibility: eps.powf(T::lit(0.75)) * bscale,
        shift: eps.powf(T::lit(0.45)) * bscale,
    };
    let feas_tol = eps.sqrt() * bscale * T::lit((m.max(1)) as f64).sqrt();

    let mut a_aug = DMatrix::<T>::zeros(m, cols);
    a_aug.columns_mut(0, n_struct).copy_from(&a_full);
    let mut basis = vec![0; m];
    let mut needs_artificial = vec![false; m];
    for i in 0..m {
        let slack_ok = i >= m_eq && a_full[(i, n + i - m_eq)] == T::one();
        if slack_ok {
            basis[i] = n + i - m_eq;
        } else {
            a_aug[(i, n_struct + i)] = T::one();
            basis[i] = n_struct + i;
            needs_artificial[i] = true;
        }
    }
    let mut tab = Tableau {
        rows: m,
        cols,
        data: vec![T::zero(); (m + 1) * w],
        basis,
        a: a_aug,
        b: b.clone(),
        cost: vec![T::zero(); cols],
        original_b: None,
        shifts: 0,
    };
    for i in 0..m {
        for j in 0..cols {
            tab.data[i * w + j] = tab.a[(i, j)];
        }
        tab.data[i * w + cols] = b[i];
    }

    let limit = 50 * (cols + m + 10);
    let mut pivots = 0usize;

    // phase 1: minimize the sum of artificials
    if needs_artificial.iter().any(|&a| a) {
        for i in (0..m).filter(|&i| needs_artificial[i]) {
            tab.cost[n_struct + i] = T::one();
        }
        tab.price();
        let allowed: Vec<bool> = (0..cols).map(|j| j < n_struct || needs_artificial[j - n_struct]).collect();
        tab.run(&allowed, &tol, &mut pivots, limit)?;
        tab.reinvert();
        let infeasibility =
            (0..m).filter(|&i| tab.basis[i] >= n_struct).fold(T::zero(), |acc, i| acc + tab.rhs(i).abs());
        if infeasibility > feas_tol {
            return Err(Error::Infeasible(format!(
                "constraints cannot be satisfied (phase-1 residual {})",
                infeasibility.as_f64()
            )));
        }
    }

    // drive remaining artificials out of the basis; rows where that fails are redundant
    let mut redundant = vec![false; m];
    for (i, flag) in redundant.iter_mut().enumerate() {
        if tab.basis[i] >= n_struct {
            let best = (0..n_struct).filter(|j| !tab.basis.contains(j)).map(|j| (j, tab.at(i, j).abs())).fold(
                None,
                |acc: Option<(usize, T)>, (j, v)| match acc {
                    Some((_, bv)) if bv >= v => acc,
                    _ => Some((j, v)),
                },
            );
            match best {
                Some((j, v)) if v > tol.pivot => {
                    tab.pivot(i, j);
                    pivots += 1;
                }
                _ => *flag = true,
            }
        }
    }

    // phase 2
    tab.cost = vec![T::zero(); cols];
    tab.cost[..n].copy_from_slice(lp.c.as_slice());
    tab.reinvert();
    tab.price();
    let allowed: Vec<bool> = (0..cols).map(|j| j < n_struct).collect();
    tab.run(&allowed, &tol, &mut pivots, limit)?;
    tab.reinvert();

    let mut x_full = vec![T::zero(); n_struct];
    for i in 0..m {
        if !redundant[i] && tab.basis[i] < n_struct {
            x_full[tab.basis[i]] = tab.rhs(i).max(T::zero());
        }
    }
    refine_basic_solution(&a_full, &b, &tab.basis, &redundant, n_struct, &mut x_full);
    let x = DVector::from_iterator(n, x_full[..n].iter().copied());
    let objective = lp.c.dot(&x);
    Ok(LpSolution { x, objective, pivots })
}

/// Re-solves `B x_B = b` on the final basis to remove accumulated tableau round-off.
fn refine_basic_solution<T: Real>(
    a: &DMatrix<T>,
    b: &DVector<T>,
    basis: &[usize],
    redundant: &[bool],
    n_struct: usize,
    x: &mut [T],
) {
    let rows: Vec<usize> = (0..a.nrows()).filter(|&i| !redundant[i]).collect();
    let cols: Vec<usize> = rows.iter().map(|&i| basis[i]).collect();
    if cols.iter().any(|&j| j >= n_struct) || cols.is_empty() {
        return;
    }
    let bmat = DMatrix::from_fn(rows.len(), cols.len(), |i, j| a[(rows[i], cols[j])]);
    let rhs = DVector::from_fn(rows.len(), |i, _| b[rows[i]]);
    let Some(sol) = bmat.lu().solve(&rhs) else { return };
    let floor = -T::machine_eps().sqrt();
    if sol.iter().all(|v| v.is_finite_value() && *v >= floor) {
        for (k, &j) in cols.iter().enumerate() {
            x[j] = sol[k].max(T::zero());
        }
    }
}
