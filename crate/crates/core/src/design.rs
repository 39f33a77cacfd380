//! Sensing-matrix design: choose which candidate rows (monitor channels) to measure by
//! genetic-algorithm minimization of the order-weighted coherence objective
//! `sum_h (1/h) max|G_h - I|`, where `G_h` is the column-normalized Gram matrix of the
//! stacked real sensing matrix at order `h`.
//!
//! One row set is shared by all orders: a physical monitor measures every harmonic.

use std::collections::{BTreeMap, HashMap};

use nalgebra::{Complex, DMatrix};
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{complex_rank, rank_tol};
use crate::measurement::{CandidateMatrix, RowTag};
use crate::scalar::Real;

/// Fitness penalty added per rank-deficient order.
pub const RANK_PENALTY: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaParams {
    pub population_size: usize,
    pub generations: usize,
    pub crossover_rate: f64,
    pub mutation_rate: f64,
    pub elitism_count: usize,
    pub rng_seed: u64,
}

impl Default for GaParams {
    fn default() -> Self {
        GaParams {
            population_size: 100,
            generations: 300,
            crossover_rate: 0.9,
            mutation_rate: 0.05,
            elitism_count: 2,
            rng_seed: 0,
        }
    }
}

impl GaParams {
    pub fn validate(&self) -> Result<()> {
        if self.population_size < 2 {
            return Err(Error::Argument("population_size must be >= 2".into()));
        }
        for (name, r) in [("crossover_rate", self.crossover_rate), ("mutation_rate", self.mutation_rate)] {
            if !(0.0..=1.0).contains(&r) {
                return Err(Error::Argument(format!("{name} must lie in [0, 1], got {r}")));
            }
        }
        if self.elitism_count > self.population_size {
            return Err(Error::Argument("elitism_count exceeds population_size".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MonitorKind {
    Voltage,
    Current,
}

/// Physical placement of one selected row.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Placement {
    pub row: usize,
    pub kind: MonitorKind,
    /// Bus hosting the device: the measured bus, or the sending end of the branch.
    pub bus: i64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub branch: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub to: Option<i64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlacementCounts {
    pub voltage: usize,
    pub current: usize,
}

/// Per-order quality of a row selection.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrderTerm<T> {
    pub order: u32,
    /// Max off-diagonal entry of the normalized stacked Gram matrix.
    pub coherence: T,
    /// Coherence of the complex sensing matrix; bounds the complex spark.
    pub complex_coherence: T,
    /// Rank of the complex sensing matrix (the stacked rank is twice this).
    pub rank: usize,
    pub full_rank: bool,
    /// `1 + 1/complex_coherence > 2k`, certifying spark > 2k.
    pub spark_certified: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SensingDesign<T: Real> {
    pub orders: Vec<u32>,
    pub sparsity_k: usize,
    /// Sorted candidate row indices.
    pub selected_rows: Vec<usize>,
    pub monitors: Vec<Placement>,
    pub per_order: Vec<OrderTerm<T>>,
    /// Weighted coherence objective of the selection.
    pub objective: T,
    pub spark_certified: bool,
    /// Best fitness after each generation (empty for hand-made designs).
    pub best_fitness_history: Vec<T>,
    /// Stacked real sensing matrix per order, aligned with `orders`.
    #[serde(skip)]
    pub per_order_h: Vec<DMatrix<T>>,
}

impl<T: Real> SensingDesign<T> {
    /// Builds and scores a design from an explicit row selection.
    pub fn from_rows(rows: &[usize], candidates: &[CandidateMatrix<T>], sparsity_k: usize) -> Result<Self> {
        check_candidates(candidates)?;
        let mut selected: Vec<usize> = rows.to_vec();
        selected.sort_unstable();
        if selected.is_empty() {
            return Err(Error::Argument("design selects no rows".into()));
        }
        if selected.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Argument("design rows must be distinct".into()));
        }
        let n_rows = candidates[0].n_rows();
        if let Some(&bad) = selected.iter().find(|&&r| r >= n_rows) {
            return Err(Error::Argument(format!("row {bad} out of range for {n_rows} candidate rows")));
        }
        let per_order: Vec<OrderTerm<T>> =
            candidates.iter().map(|c| order_term(c, &selected, sparsity_k, true)).collect();
        let objective = weighted_sum(&per_order);
        Ok(SensingDesign {
            orders: candidates.iter().map(|c| c.order).collect(),
            sparsity_k,
            monitors: extract_monitors(&selected, &candidates[0]),
            spark_certified: per_order.iter().all(|t| t.spark_certified),
            per_order_h: candidates.iter().map(|c| c.stacked(&selected)).collect(),
            selected_rows: selected,
            per_order,
            objective,
            best_fitness_history: Vec::new(),
        })
    }

    pub fn n_rows(&self) -> usize {
        self.selected_rows.len()
    }

    pub fn sensing_matrix(&self, order: u32) -> Option<&DMatrix<T>> {
        self.orders.iter().position(|&o| o == order).map(|i| &self.per_order_h[i])
    }

    pub fn counts(&self) -> PlacementCounts {
        count_placements(&self.monitors)
    }

    pub fn is_full_rank(&self) -> bool {
        self.per_order.iter().all(|t| t.full_rank)
    }
}

fn check_candidates<T: Real>(candidates: &[CandidateMatrix<T>]) -> Result<()> {
    let first = candidates.first().ok_or_else(|| Error::Argument("no candidate matrices supplied".into()))?;
    if candidates.iter().any(|c| c.n_rows() != first.n_rows() || c.n_buses() != first.n_buses()) {
        return Err(Error::Argument("candidate matrices differ in shape across orders".into()));
    }
    Ok(())
}

fn weighted_sum<T: Real>(terms: &[OrderTerm<T>]) -> T {
    terms.iter().fold(T::zero(), |acc, t| acc + t.coherence / T::lit(t.order as f64))
}

/// Coherence figures of one order's selected submatrix, via the complex Gram matrix
/// `G = H^* H`: the stacked Gram is `[[Re G, -Im G], [Im G, Re G]]`.
fn order_term<T: Real>(cand: &CandidateMatrix<T>, rows: &[usize], k: usize, with_rank: bool) -> OrderTerm<T> {
    let m = rows.len();
    let n = cand.n_buses();
    let a = DMatrix::from_fn(m, n, |i, j| cand.rows[(rows[i], j)].re);
    let b = DMatrix::from_fn(m, n, |i, j| cand.rows[(rows[i], j)].im);
    let mut ab = DMatrix::zeros(2 * m, n);
    ab.rows_mut(0, m).copy_from(&a);
    ab.rows_mut(m, m).copy_from(&b);
    let re_g = ab.transpose() * &ab;
    let cross = a.transpose() * &b;
    let norms: Vec<T> = (0..n).map(|j| re_g[(j, j)].sqrt()).collect();

    let (coherence, complex_coherence) = if norms.iter().any(|v| *v == T::zero()) {
        (T::infinity(), T::one())
    } else {
        let mut stacked = T::zero();
        let mut complex = T::zero();
        for j in 0..n {
            for i in 0..j {
                let s = norms[i] * norms[j];
                let re = re_g[(i, j)] / s;
                let im = (cross[(i, j)] - cross[(j, i)]) / s;
                stacked = stacked.max(re.abs()).max(im.abs());
                complex = complex.max((re * re + im * im).sqrt());
            }
        }
        (stacked, complex)
    };
    let rank = if with_rank { complex_rank(&cand.select(rows), rank_tol::<T>()) } else { m.min(n) };
    let bound = if complex_coherence == T::zero() { T::infinity() } else { T::one() + T::one() / complex_coherence };
    OrderTerm {
        order: cand.order,
        coherence,
        complex_coherence,
        rank,
        full_rank: rank == m.min(n),
        spark_certified: bound > T::lit(2.0 * k as f64),
    }
}

/// Weighted coherence objective of a row set over all orders; `+inf` when a selected
/// submatrix has a zero column.
pub fn design_objective<T: Real>(rows: &[usize], candidates: &[CandidateMatrix<T>]) -> Result<T> {
    check_candidates(candidates)?;
    if rows.is_empty() {
        return Err(Error::Argument("design selects no rows".into()));
    }
    let terms: Vec<OrderTerm<T>> = candidates.iter().map(|c| order_term(c, rows, 0, false)).collect();
    Ok(weighted_sum(&terms))
}

pub fn extract_monitors<T: Real>(rows: &[usize], candidates: &CandidateMatrix<T>) -> Vec<Placement> {
    rows.iter()
        .map(|&row| match candidates.row_tags[row] {
            RowTag::VoltageAt { bus, .. } => Placement { row, kind: MonitorKind::Voltage, bus, branch: None, to: None },
            RowTag::CurrentOn { branch, from, to } => {
                Placement { row, kind: MonitorKind::Current, bus: from, branch: Some(branch), to: Some(to) }
            }
        })
        .collect()
}

pub fn count_placements(placements: &[Placement]) -> PlacementCounts {
    placements.iter().fold(PlacementCounts::default(), |mut c, p| {
        match p.kind {
            MonitorKind::Voltage => c.voltage += 1,
            MonitorKind::Current => c.current += 1,
        }
        c
    })
}

/// Channels grouped by the bus hosting the device.
pub fn group_by_location(placements: &[Placement]) -> BTreeMap<i64, Vec<usize>> {
    let mut out: BTreeMap<i64, Vec<usize>> = BTreeMap::new();
    for p in placements {
        out.entry(p.bus).or_default().push(p.row);
    }
    out
}

#[derive(Debug, Clone)]
struct Evaluation<T> {
    objective: T,
    fitness: T,
    deficient: Vec<u32>,
}

fn evaluate<T: Real>(rows: &[usize], candidates: &[CandidateMatrix<T>]) -> Evaluation<T> {
    let terms: Vec<OrderTerm<T>> = candidates.iter().map(|c| order_term(c, rows, 0, true)).collect();
    let objective = weighted_sum(&terms);
    let deficient: Vec<u32> = terms.iter().filter(|t| !t.full_rank).map(|t| t.order).collect();
    let fitness = objective + T::lit(RANK_PENALTY * deficient.len() as f64);
    Evaluation { objective, fitness, deficient }
}

fn random_subset<R: Rng>(rng: &mut R, n: usize, m: usize) -> Vec<usize> {
    let mut v = index::sample(rng, n, m).into_vec();
    v.sort_unstable();
    v
}

/// Union of the parents, randomly down-sampled to `m` rows.
fn crossover<R: Rng>(rng: &mut R, a: &[usize], b: &[usize], m: usize) -> Vec<usize> {
    let mut pool: Vec<usize> = a.iter().chain(b.iter()).copied().collect();
    pool.sort_unstable();
    pool.dedup();
    let mut child: Vec<usize> = index::sample(rng, pool.len(), m).into_iter().map(|i| pool[i]).collect();
    child.sort_unstable();
    child
}

/// Each gene is swapped, with probability `rate`, for a row outside the selection.
fn mutate<R: Rng>(rng: &mut R, genes: &mut [usize], n: usize, rate: f64) {
    if genes.len() >= n {
        return;
    }
    for g in 0..genes.len() {
        if rng.random::<f64>() < rate {
            loop {
                let candidate = rng.random_range(0..n);
                if !genes.contains(&candidate) {
                    genes[g] = candidate;
                    break;
                }
            }
        }
    }
    genes.sort_unstable();
}

fn tournament<R: Rng, T: Real>(rng: &mut R, fitness: &[T]) -> usize {
    const SIZE: usize = 3;
    let mut best = rng.random_range(0..fitness.len());
    for _ in 1..SIZE {
        let c = rng.random_range(0..fitness.len());
        if fitness[c] < fitness[best] || (fitness[c] == fitness[best] && c < best) {
            best = c;
        }
    }
    best
}

/// Genetic-algorithm row selection.
///
/// Chromosomes are size-`m` row sets. Fitness is the weighted coherence objective plus
/// [`RANK_PENALTY`] for every order whose complex submatrix is not of full rank.
/// Requires `2k <= m <= N_b + N_l`.
pub fn ga_select_rows<T: Real>(
    candidates: &[CandidateMatrix<T>],
    m: usize,
    k: usize,
    params: &GaParams,
) -> Result<SensingDesign<T>> {
    check_candidates(candidates)?;
    params.validate()?;
    let n_rows = candidates[0].n_rows();
    if m == 0 || m > n_rows {
        return Err(Error::Argument(format!("m = {m} must lie in 1..={n_rows}")));
    }
    if m < 2 * k {
        return Err(Error::Argument(format!("m = {m} is too small: spark > 2k needs m >= 2k = {}", 2 * k)));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(params.rng_seed);
    let mut cache: HashMap<Vec<usize>, Evaluation<T>> = HashMap::new();
    let mut population: Vec<Vec<usize>> =
        (0..params.population_size).map(|_| random_subset(&mut rng, n_rows, m)).collect();

    let score = |pop: &[Vec<usize>], cache: &mut HashMap<Vec<usize>, Evaluation<T>>| -> Vec<T> {
        let mut fresh: Vec<&Vec<usize>> = pop.iter().filter(|g| !cache.contains_key(*g)).collect();
        fresh.sort();
        fresh.dedup();
        let evals: Vec<Evaluation<T>> = fresh.par_iter().map(|g| evaluate(g, candidates)).collect();
        for (g, e) in fresh.into_iter().zip(evals) {
            cache.insert(g.clone(), e);
        }
        pop.iter().map(|g| cache[g].fitness).collect()
    };

    let mut fitness = score(&population, &mut cache);
    let mut best_idx = argmin(&fitness);
    let mut best = population[best_idx].clone();
    let mut best_fit = fitness[best_idx];
    let mut history = Vec::with_capacity(params.generations + 1);
    history.push(best_fit);

    for _ in 0..params.generations {
        let mut order: Vec<usize> = (0..population.len()).collect();
        order
            .sort_by(|&a, &b| fitness[a].partial_cmp(&fitness[b]).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b)));
        let mut next: Vec<Vec<usize>> =
            order.iter().take(params.elitism_count).map(|&i| population[i].clone()).collect();
        while next.len() < params.population_size {
            let p1 = tournament(&mut rng, &fitness);
            let p2 = tournament(&mut rng, &fitness);
            let mut child = if rng.random::<f64>() < params.crossover_rate {
                crossover(&mut rng, &population[p1], &population[p2], m)
            } else {
                population[p1].clone()
            };
            mutate(&mut rng, &mut child, n_rows, params.mutation_rate);
            next.push(child);
        }
        population = next;
        fitness = score(&population, &mut cache);
        best_idx = argmin(&fitness);
        if fitness[best_idx] < best_fit {
            best_fit = fitness[best_idx];
            best = population[best_idx].clone();
        }
        history.push(best_fit);
    }

    let eval = &cache[&best];
    if !eval.deficient.is_empty() {
        return Err(Error::DesignInfeasible {
            best_objective: eval.objective.as_f64(),
            deficient_orders: eval.deficient.clone(),
        });
    }
    let mut design = SensingDesign::from_rows(&best, candidates, k)?;
    design.best_fitness_history = history;
    Ok(design)
}

fn argmin<T: Real>(v: &[T]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x < v[best] {
            best = i;
        }
    }
    best
}

/// Complex identity-like candidate matrix, used by examples and tests.
pub fn identity_candidates<T: Real>(n: usize, order: u32) -> CandidateMatrix<T> {
    CandidateMatrix {
        order,
        rows: DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                Complex::new(T::one(), T::zero())
            } else {
                Complex::new(T::zero(), T::zero())
            }
        }),
        row_tags: (0..n).map(|i| RowTag::VoltageAt { index: i, bus: i as i64 + 1 }).collect(),
    }
}
