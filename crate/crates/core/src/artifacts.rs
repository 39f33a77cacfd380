//! JSON and CSV artifact formats. Complex numbers are written as `[re, im]` pairs.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{Complex, DVector};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::design::{group_by_location, GaParams, Placement, PlacementCounts, SensingDesign};
use crate::error::{Error, Result};
use crate::hse::{EvaluationReport, GroundTruth, HseEstimate, OrderEstimate};
use crate::measurement::{CorruptionSpec, InjectionScenario, MeasurementSet, RowTag};
use crate::recovery::SolverKind;

pub type C64 = [f64; 2];

pub fn to_pairs(v: &DVector<Complex<f64>>) -> Vec<C64> {
    v.iter().map(|z| [z.re, z.im]).collect()
}

pub fn from_pairs(v: &[C64]) -> DVector<Complex<f64>> {
    DVector::from_iterator(v.len(), v.iter().map(|p| Complex::new(p[0], p[1])))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Internal(e.to_string()))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Format {
        path: path.to_path_buf(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OrderTermRecord {
    pub order: u32,
    pub coherence: f64,
    pub weighted: f64,
    pub complex_coherence: f64,
    pub rank: usize,
    pub full_rank: bool,
    pub spark_certified: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DesignFile {
    pub orders: Vec<u32>,
    pub sparsity_k: usize,
    pub m: usize,
    pub selected_rows: Vec<usize>,
    pub placements: Vec<Placement>,
    pub counts: PlacementCounts,
    /// Row indices per hosting bus id.
    pub devices: BTreeMap<String, Vec<usize>>,
    pub per_order: Vec<OrderTermRecord>,
    pub objective: f64,
    pub spark_certified: bool,
    #[serde(default)]
    pub ga: Option<GaParams>,
    #[serde(default)]
    pub best_fitness_history: Vec<f64>,
}

impl DesignFile {
    pub fn from_design(d: &SensingDesign<f64>, ga: Option<GaParams>) -> Self {
        DesignFile {
            orders: d.orders.clone(),
            sparsity_k: d.sparsity_k,
            m: d.selected_rows.len(),
            selected_rows: d.selected_rows.clone(),
            placements: d.monitors.clone(),
            counts: d.counts(),
            devices: group_by_location(&d.monitors).into_iter().map(|(bus, rows)| (bus.to_string(), rows)).collect(),
            per_order: d
                .per_order
                .iter()
                .map(|t| OrderTermRecord {
                    order: t.order,
                    coherence: t.coherence,
                    weighted: t.coherence / t.order as f64,
                    complex_coherence: t.complex_coherence,
                    rank: t.rank,
                    full_rank: t.full_rank,
                    spark_certified: t.spark_certified,
                })
                .collect(),
            objective: d.objective,
            spark_certified: d.spark_certified,
            ga,
            best_fitness_history: d.best_fitness_history.clone(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioOrder {
    pub order: u32,
    pub injections: Vec<C64>,
    pub voltages: Vec<C64>,
    pub background_std: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioFile {
    pub seed: u64,
    pub bus_ids: Vec<i64>,
    /// Source bus indices (0-based, file order).
    pub support: Vec<usize>,
    pub support_bus_ids: Vec<i64>,
    pub orders: Vec<ScenarioOrder>,
}

impl ScenarioFile {
    pub fn new(
        seed: u64,
        bus_ids: &[i64],
        scenario: &InjectionScenario<f64>,
        voltages: &[DVector<Complex<f64>>],
    ) -> Self {
        ScenarioFile {
            seed,
            bus_ids: bus_ids.to_vec(),
            support: scenario.support.clone(),
            support_bus_ids: scenario.support.iter().map(|&i| bus_ids[i]).collect(),
            orders: scenario
                .orders
                .iter()
                .enumerate()
                .map(|(i, &h)| ScenarioOrder {
                    order: h,
                    injections: to_pairs(&scenario.injections[i]),
                    voltages: to_pairs(&voltages[i]),
                    background_std: scenario.background_std[i],
                })
                .collect(),
        }
    }

    pub fn truth(&self) -> GroundTruth<f64> {
        GroundTruth {
            orders: self.orders.iter().map(|o| o.order).collect(),
            injections: self.orders.iter().map(|o| from_pairs(&o.injections)).collect(),
            voltages: self.orders.iter().map(|o| from_pairs(&o.voltages)).collect(),
            support: Some(self.support.clone()),
            bus_ids: self.bus_ids.clone(),
        }
    }

    pub fn scenario(&self) -> InjectionScenario<f64> {
        InjectionScenario {
            support: self.support.clone(),
            orders: self.orders.iter().map(|o| o.order).collect(),
            injections: self.orders.iter().map(|o| from_pairs(&o.injections)).collect(),
            background_std: self.orders.iter().map(|o| o.background_std).collect(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MeasurementOrder {
    pub order: u32,
    pub rows: Vec<usize>,
    pub tags: Vec<RowTag>,
    pub values: Vec<C64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MeasurementsFile {
    /// Corruption used for the data; recovery perturbs its sensing matrices with the
    /// same settings (one perturbation per order).
    pub corruption: Option<CorruptionSpec>,
    pub master_seed: u64,
    pub orders: Vec<MeasurementOrder>,
}

impl MeasurementsFile {
    pub fn new(corruption: Option<CorruptionSpec>, master_seed: u64, sets: &[MeasurementSet<f64>]) -> Self {
        MeasurementsFile {
            corruption,
            master_seed,
            orders: sets
                .iter()
                .map(|s| MeasurementOrder {
                    order: s.order,
                    rows: s.rows.clone(),
                    tags: s.tags.clone(),
                    values: to_pairs(&s.values),
                })
                .collect(),
        }
    }

    pub fn sets(&self) -> Vec<MeasurementSet<f64>> {
        self.orders
            .iter()
            .map(|o| MeasurementSet {
                order: o.order,
                values: from_pairs(&o.values),
                rows: o.rows.clone(),
                tags: o.tags.clone(),
            })
            .collect()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EstimateOrder {
    pub order: u32,
    pub injections: Vec<C64>,
    pub voltages: Vec<C64>,
    pub support: Vec<usize>,
    pub residual_l2: Option<f64>,
    pub objective_value: Option<f64>,
    pub iterations: Option<usize>,
    pub converged: Option<bool>,
    pub ill_conditioned: Option<bool>,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EstimateFile {
    pub solver: SolverKind,
    pub orders: Vec<EstimateOrder>,
}

impl EstimateFile {
    pub fn new(solver: SolverKind, est: &HseEstimate<f64>) -> Self {
        EstimateFile {
            solver,
            orders: est
                .orders
                .iter()
                .map(|o| EstimateOrder {
                    order: o.order,
                    injections: to_pairs(&o.injections),
                    voltages: to_pairs(&o.voltages),
                    support: o.support.clone(),
                    residual_l2: o.recovery.as_ref().map(|r| r.residual_l2),
                    objective_value: o.recovery.as_ref().map(|r| r.objective_value),
                    iterations: o.recovery.as_ref().map(|r| r.iterations),
                    converged: o.recovery.as_ref().map(|r| r.converged),
                    ill_conditioned: o.recovery.as_ref().map(|r| r.ill_conditioned),
                    failure: o.failure.clone(),
                })
                .collect(),
        }
    }

    /// Estimate without the solver internals (enough for evaluation).
    pub fn estimate(&self) -> HseEstimate<f64> {
        HseEstimate {
            orders: self
                .orders
                .iter()
                .map(|o| OrderEstimate {
                    order: o.order,
                    injections: from_pairs(&o.injections),
                    voltages: from_pairs(&o.voltages),
                    support: o.support.clone(),
                    recovery: None,
                    failure: o.failure.clone(),
                })
                .collect(),
        }
    }
}

/// `report.json` contents: evaluation plus the settings that produced it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReportFile {
    pub settings: serde_json::Value,
    pub evaluation: EvaluationReport,
}

pub const CSV_HEADER: &str =
    "order,bus,true_current_mag,est_current_mag,current_abs_error,true_voltage_mag,est_voltage_mag,voltage_abs_error";

/// Per-bus, per-order magnitudes and errors for currents and voltages.
pub fn report_csv(truth: &GroundTruth<f64>, est: &HseEstimate<f64>) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for (i, &h) in truth.orders.iter().enumerate() {
        let Some(e) = est.orders.iter().find(|o| o.order == h) else { continue };
        for (b, &bus) in truth.bus_ids.iter().enumerate() {
            let xt = truth.injections[i][b];
            let xe = e.injections[b];
            let vt = truth.voltages[i][b];
            let ve = e.voltages[b];
            let _ = writeln!(
                out,
                "{h},{bus},{:.9e},{:.9e},{:.9e},{:.9e},{:.9e},{:.9e}",
                xt.norm(),
                xe.norm(),
                (xt - xe).norm(),
                vt.norm(),
                ve.norm(),
                (vt.norm() - ve.norm()).abs()
            );
        }
    }
    out
}
