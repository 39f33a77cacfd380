//! Sparse recovery solvers.
//!
//! Every solver works on a real system `y = H x` (complex problems are stacked first)
//! and returns a [`RecoveryResult`] whose `residual_l2` is recomputed from the inputs.

mod greedy;
mod l0;
mod lp;
mod prox;
pub mod simplex;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

pub use greedy::{cosamp, iht, omp};
pub use l0::{l0_oracle, L0_MAX_SUBSETS};
pub use lp::{bp_lp, bp_noisy, dantzig};
pub use prox::{bpdn, lasso, lasso_traced, soft_threshold};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundNorm {
    L1,
    Linf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    L0Oracle,
    BasisPursuit,
    BpNoisyL1,
    BpNoisyLinf,
    Bpdn,
    Lasso,
    Dantzig,
    Omp,
    Cosamp,
    Iht,
}

impl SolverKind {
    pub const ALL: [SolverKind; 10] = [
        SolverKind::L0Oracle,
        SolverKind::BasisPursuit,
        SolverKind::BpNoisyL1,
        SolverKind::BpNoisyLinf,
        SolverKind::Bpdn,
        SolverKind::Lasso,
        SolverKind::Dantzig,
        SolverKind::Omp,
        SolverKind::Cosamp,
        SolverKind::Iht,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SolverKind::L0Oracle => "l0",
            SolverKind::BasisPursuit => "bp",
            SolverKind::BpNoisyL1 => "bp-l1",
            SolverKind::BpNoisyLinf => "bp-linf",
            SolverKind::Bpdn => "bpdn",
            SolverKind::Lasso => "lasso",
            SolverKind::Dantzig => "dantzig",
            SolverKind::Omp => "omp",
            SolverKind::Cosamp => "cosamp",
            SolverKind::Iht => "iht",
        }
    }
}

impl std::str::FromStr for SolverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SolverKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Argument(format!("unknown solver `{s}`")))
    }
}

impl std::fmt::Display for SolverKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig<T> {
    /// Noise bound for the constrained formulations.
    pub epsilon: T,
    /// LASSO penalty weight.
    pub lambda: T,
    pub max_iterations: usize,
    pub convergence_tol: T,
    /// Target sparsity for the greedy methods and the L0 search bound.
    pub sparsity_k: usize,
}

impl<T: Real> Default for SolverConfig<T> {
    fn default() -> Self {
        SolverConfig {
            epsilon: T::lit(0.01),
            lambda: T::lit(0.01),
            max_iterations: 10_000,
            convergence_tol: T::lit(1e-8),
            sparsity_k: 0,
        }
    }
}

impl<T: Real> SolverConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon >= T::zero()) {
            return Err(Error::Argument("epsilon must be >= 0".into()));
        }
        if !(self.lambda >= T::zero()) {
            return Err(Error::Argument("lambda must be >= 0".into()));
        }
        if self.max_iterations < 1 {
            return Err(Error::Argument("max_iterations must be >= 1".into()));
        }
        if !(self.convergence_tol > T::zero()) {
            return Err(Error::Argument("convergence_tol must be > 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecoveryResult<T: Real> {
    pub x_hat: DVector<T>,
    pub residual_l2: T,
    pub solver: SolverKind,
    pub iterations: usize,
    pub converged: bool,
    pub objective_value: T,
    /// A least-squares step ran on a numerically rank-deficient support.
    pub ill_conditioned: bool,
}

impl<T: Real> RecoveryResult<T> {
    pub(crate) fn new(
        h: &DMatrix<T>,
        y: &DVector<T>,
        x_hat: DVector<T>,
        solver: SolverKind,
        iterations: usize,
        converged: bool,
        objective_value: T,
    ) -> Self {
        RecoveryResult {
            residual_l2: residual_l2(h, y, &x_hat),
            x_hat,
            solver,
            iterations,
            converged,
            objective_value,
            ill_conditioned: false,
        }
    }

    /// Indices of entries with magnitude above `threshold`.
    pub fn support(&self, threshold: T) -> Vec<usize> {
        self.x_hat.iter().enumerate().filter(|(_, v)| v.abs() > threshold).map(|(i, _)| i).collect()
    }
}

pub fn residual_l2<T: Real>(h: &DMatrix<T>, y: &DVector<T>, x: &DVector<T>) -> T {
    (y - h * x).norm()
}

pub(crate) fn check_dims<T: Real>(h: &DMatrix<T>, y: &DVector<T>) -> Result<()> {
    if h.nrows() != y.len() {
        return Err(Error::Argument(format!(
            "sensing matrix has {} rows but measurement vector has length {}",
            h.nrows(),
            y.len()
        )));
    }
    if h.ncols() == 0 {
        return Err(Error::Argument("sensing matrix has no columns".into()));
    }
    Ok(())
}

/// Runs the solver named by `kind` with the settings in `cfg`.
pub fn solve<T: Real>(
    kind: SolverKind,
    h: &DMatrix<T>,
    y: &DVector<T>,
    cfg: &SolverConfig<T>,
) -> Result<RecoveryResult<T>> {
    cfg.validate()?;
    match kind {
        SolverKind::L0Oracle => l0_oracle(h, y, cfg.sparsity_k),
        SolverKind::BasisPursuit => bp_lp(h, y),
        SolverKind::BpNoisyL1 => bp_noisy(h, y, cfg.epsilon, BoundNorm::L1),
        SolverKind::BpNoisyLinf => bp_noisy(h, y, cfg.epsilon, BoundNorm::Linf),
        SolverKind::Bpdn => bpdn(h, y, cfg.epsilon, cfg),
        SolverKind::Lasso => lasso(h, y, cfg.lambda, cfg),
        SolverKind::Dantzig => dantzig(h, y, cfg.epsilon),
        SolverKind::Omp => omp(h, y, cfg.sparsity_k, cfg),
        SolverKind::Cosamp => cosamp(h, y, cfg.sparsity_k, cfg),
        SolverKind::Iht => iht(h, y, cfg.sparsity_k, cfg),
    }
}
