//! Per-order harmonic state estimation and its evaluation against ground truth.

use std::collections::BTreeSet;

use nalgebra::{Complex, DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::design::SensingDesign;
use crate::error::{Error, Result};
use crate::measurement::{unstack, MeasurementSet};
use crate::network::HarmonicOrderModel;
use crate::recovery::{self, RecoveryResult, SolverConfig, SolverKind};
use crate::scalar::{cabs, Real};

/// Default support threshold (p.u.) for noise-free runs.
pub const DEFAULT_SUPPORT_THRESHOLD: f64 = 1e-6;

/// `V^h = Z^h X^h`.
pub fn reconstruct_voltages<T: Real>(
    model: &HarmonicOrderModel<T>,
    x: &DVector<Complex<T>>,
) -> Result<DVector<Complex<T>>> {
    if x.len() != model.n_buses() {
        return Err(Error::Argument(format!(
            "injection vector has length {}, model has {} buses",
            x.len(),
            model.n_buses()
        )));
    }
    Ok(&model.zbus * x)
}

#[derive(Debug, Clone)]
pub struct OrderEstimate<T: Real> {
    pub order: u32,
    pub injections: DVector<Complex<T>>,
    pub voltages: DVector<Complex<T>>,
    /// Bus indices whose estimated injection magnitude reaches the support threshold.
    pub support: Vec<usize>,
    pub recovery: Option<RecoveryResult<T>>,
    /// Solver error for this order; the injections are then zero.
    pub failure: Option<String>,
}

#[derive(Debug, Clone)]
pub struct HseEstimate<T: Real> {
    pub orders: Vec<OrderEstimate<T>>,
}

impl<T: Real> HseEstimate<T> {
    pub fn order(&self, h: u32) -> Option<&OrderEstimate<T>> {
        self.orders.iter().find(|o| o.order == h)
    }
}

fn threshold_at<T: Real>(thresholds: &[T], i: usize) -> T {
    match thresholds.len() {
        0 => T::lit(DEFAULT_SUPPORT_THRESHOLD),
        1 => thresholds[0],
        _ => thresholds[i],
    }
}

fn support_of<T: Real>(x: &DVector<Complex<T>>, threshold: T) -> Vec<usize> {
    x.iter().enumerate().filter(|(_, v)| cabs(**v) >= threshold && cabs(**v) > T::zero()).map(|(i, _)| i).collect()
}

/// Recovers injections and voltages for every order using the design's sensing matrices.
pub fn estimate<T: Real>(
    design: &SensingDesign<T>,
    measurements: &[MeasurementSet<T>],
    models: &[HarmonicOrderModel<T>],
    solver: SolverKind,
    config: &SolverConfig<T>,
    support_threshold: &[T],
) -> Result<HseEstimate<T>> {
    if design.orders.len() != measurements.len() {
        return Err(Error::Argument(format!(
            "design covers {} orders but {} measurement sets were given",
            design.orders.len(),
            measurements.len()
        )));
    }
    for (h, ms) in design.orders.iter().zip(measurements) {
        if ms.order != *h || ms.rows != design.selected_rows {
            return Err(Error::Argument(format!("measurement set for order {} does not match the design", ms.order)));
        }
    }
    estimate_with_matrices(&design.per_order_h, measurements, models, solver, config, support_threshold)
}

/// Like [`estimate`] with explicit stacked sensing matrices (e.g. perturbed ones).
pub fn estimate_with_matrices<T: Real>(
    sensing: &[DMatrix<T>],
    measurements: &[MeasurementSet<T>],
    models: &[HarmonicOrderModel<T>],
    solver: SolverKind,
    config: &SolverConfig<T>,
    support_threshold: &[T],
) -> Result<HseEstimate<T>> {
    if sensing.len() != measurements.len() || models.len() != measurements.len() {
        return Err(Error::Argument(format!(
            "{} sensing matrices, {} measurement sets and {} models do not line up",
            sensing.len(),
            measurements.len(),
            models.len()
        )));
    }
    for (i, (ms, model)) in measurements.iter().zip(models).enumerate() {
        if ms.order != model.order {
            return Err(Error::Argument(format!(
                "measurement order {} paired with model order {}",
                ms.order, model.order
            )));
        }
        if sensing[i].nrows() != 2 * ms.values.len() || sensing[i].ncols() != 2 * model.n_buses() {
            return Err(Error::Argument(format!("sensing matrix shape mismatch at order {}", ms.order)));
        }
    }
    config.validate()?;
    let orders: Vec<OrderEstimate<T>> = (0..measurements.len())
        .into_par_iter()
        .map(|i| {
            let ms = &measurements[i];
            let model = &models[i];
            let n = model.n_buses();
            let y = ms.stacked();
            let zero = DVector::from_element(n, Complex::new(T::zero(), T::zero()));
            let (injections, recovery, failure) = match recovery::solve(solver, &sensing[i], &y, config) {
                Ok(res) => {
                    let x = unstack(&res.x_hat).expect("stacked solution has even length");
                    (x, Some(res), None)
                }
                Err(e) => (zero, None, Some(e.to_string())),
            };
            let voltages = &model.zbus * &injections;
            OrderEstimate {
                order: ms.order,
                support: support_of(&injections, threshold_at(support_threshold, i)),
                injections,
                voltages,
                recovery,
                failure,
            }
        })
        .collect();
    Ok(HseEstimate { orders })
}

/// True injections and voltages per order.
#[derive(Debug, Clone)]
pub struct GroundTruth<T: Real> {
    pub orders: Vec<u32>,
    pub injections: Vec<DVector<Complex<T>>>,
    pub voltages: Vec<DVector<Complex<T>>>,
    /// Declared source buses; when absent the support is thresholded from `injections`.
    pub support: Option<Vec<usize>>,
    pub bus_ids: Vec<i64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderMetrics {
    pub order: u32,
    pub precision: f64,
    pub recall: f64,
    pub true_sources: Vec<i64>,
    pub detected_sources: Vec<i64>,
    pub false_sources: Vec<i64>,
    pub missed_sources: Vec<i64>,
    /// Magnitude of the complex injection error (p.u.).
    pub max_current_error: f64,
    pub mean_current_error: f64,
    /// Absolute bus-voltage magnitude error (p.u.).
    pub max_voltage_error: f64,
    pub mean_voltage_error: f64,
    pub solver_failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub per_order: Vec<OrderMetrics>,
    pub min_precision: f64,
    pub min_recall: f64,
    pub max_current_error: f64,
    pub max_voltage_error: f64,
    pub all_sources_detected: bool,
}

/// Support precision/recall and injection/voltage errors per order.
///
/// An empty estimated support gives precision 1 and an empty true support recall 1.
pub fn evaluate<T: Real>(
    truth: &GroundTruth<T>,
    estimate: &HseEstimate<T>,
    support_threshold: &[T],
) -> Result<EvaluationReport> {
    if truth.orders.len() != estimate.orders.len() {
        return Err(Error::Argument("truth and estimate cover different orders".into()));
    }
    let mut per_order = Vec::with_capacity(truth.orders.len());
    for (i, &h) in truth.orders.iter().enumerate() {
        let est = &estimate.orders[i];
        if est.order != h {
            return Err(Error::Argument(format!("order {h} of the truth paired with estimate order {}", est.order)));
        }
        let xt = &truth.injections[i];
        let vt = &truth.voltages[i];
        if xt.len() != est.injections.len() || vt.len() != est.voltages.len() {
            return Err(Error::Argument(format!("dimension mismatch at order {h}")));
        }
        let thr = threshold_at(support_threshold, i);
        let true_set: BTreeSet<usize> = match &truth.support {
            Some(s) => s.iter().copied().collect(),
            None => support_of(xt, thr).into_iter().collect(),
        };
        let est_set: BTreeSet<usize> = support_of(&est.injections, thr).into_iter().collect();
        let hits = true_set.intersection(&est_set).count();
        let precision = if est_set.is_empty() { 1.0 } else { hits as f64 / est_set.len() as f64 };
        let recall = if true_set.is_empty() { 1.0 } else { hits as f64 / true_set.len() as f64 };

        let cur: Vec<f64> = xt.iter().zip(est.injections.iter()).map(|(a, b)| cabs(a - b).as_f64()).collect();
        let vol: Vec<f64> =
            vt.iter().zip(est.voltages.iter()).map(|(a, b)| (cabs(*a) - cabs(*b)).abs().as_f64()).collect();
        let ids = |set: &mut dyn Iterator<Item = usize>| -> Vec<i64> { set.map(|i| truth.bus_ids[i]).collect() };
        per_order.push(OrderMetrics {
            order: h,
            precision,
            recall,
            true_sources: ids(&mut true_set.iter().copied()),
            detected_sources: ids(&mut est_set.iter().copied()),
            false_sources: ids(&mut est_set.difference(&true_set).copied()),
            missed_sources: ids(&mut true_set.difference(&est_set).copied()),
            max_current_error: cur.iter().copied().fold(0.0, f64::max),
            mean_current_error: mean(&cur),
            max_voltage_error: vol.iter().copied().fold(0.0, f64::max),
            mean_voltage_error: mean(&vol),
            solver_failure: est.failure.clone(),
        });
    }
    Ok(EvaluationReport {
        min_precision: per_order.iter().map(|o| o.precision).fold(1.0, f64::min),
        min_recall: per_order.iter().map(|o| o.recall).fold(1.0, f64::min),
        max_current_error: per_order.iter().map(|o| o.max_current_error).fold(0.0, f64::max),
        max_voltage_error: per_order.iter().map(|o| o.max_voltage_error).fold(0.0, f64::max),
        all_sources_detected: per_order.iter().all(|o| o.missed_sources.is_empty()),
        per_order,
    })
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}
