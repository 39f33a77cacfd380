//! End-to-end experiment runner: load, model, design, simulate, recover, evaluate.
//!
//! All randomness comes from one master seed. Stage seeds are derived with
//! [`derive_seed`] from the tags `"design"`, `"scenario"`, `"noise:{h}"` and
//! `"matrix:{h}"`.

use std::path::{Path, PathBuf};

use nalgebra::{Complex, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::artifacts::{
    read_json, report_csv, write_json, DesignFile, EstimateFile, MeasurementsFile, ReportFile, ScenarioFile,
};
use crate::design::{ga_select_rows, GaParams, SensingDesign};
use crate::error::{Error, Result};
use crate::hse::{
    estimate_with_matrices, evaluate, EvaluationReport, GroundTruth, HseEstimate, DEFAULT_SUPPORT_THRESHOLD,
};
use crate::measurement::{
    build_candidate_matrix, corrupt_matrix, make_injection_scenario, simulate_rows, CandidateMatrix, CorruptionSpec,
    InjectionScenario, MeasurementSet,
};
use crate::network::{build_models, load_case, HarmonicOrderModel, NetworkCase};
use crate::recovery::{SolverConfig, SolverKind};

/// Odd harmonic orders 3, 5, ..., 23.
pub fn default_orders() -> Vec<u32> {
    (3..=23).step_by(2).collect()
}

/// Noisy-case error bound.
pub const DEFAULT_EPSILON: f64 = 0.01;
/// Multiple of the background injection std used as the corrupted-run support threshold.
pub const BACKGROUND_THRESHOLD_FACTOR: f64 = 3.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub case_path: PathBuf,
    pub orders: Vec<u32>,
    pub k: usize,
    pub m: usize,
    pub magnitude_mean: f64,
    pub magnitude_std: f64,
    pub corruption: Option<CorruptionSpec>,
    /// `None` picks `bp` for clean data and `bpdn` for corrupted data.
    pub solver: Option<SolverKind>,
    pub solver_config: SolverConfig<f64>,
    pub ga: GaParams,
    pub seed: u64,
    /// `None` uses the default rule (1e-6 clean, 3x background std corrupted).
    pub support_threshold: Option<f64>,
    /// Reuse the rows of an existing `design.json` instead of running the GA.
    pub design_path: Option<PathBuf>,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        ExperimentSpec {
            case_path: PathBuf::from("data/ieee118.json"),
            orders: default_orders(),
            k: 30,
            m: 60,
            magnitude_mean: 0.2,
            magnitude_std: 0.05,
            corruption: None,
            solver: None,
            solver_config: SolverConfig { epsilon: DEFAULT_EPSILON, ..SolverConfig::default() },
            ga: GaParams::default(),
            seed: 0,
            support_threshold: None,
            design_path: None,
        }
    }
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        if self.orders.is_empty() {
            return Err(Error::Argument("at least one harmonic order is required".into()));
        }
        for &h in &self.orders {
            crate::network::check_order(h)?;
        }
        let mut sorted = self.orders.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.orders.len() {
            return Err(Error::Argument("harmonic orders must be distinct".into()));
        }
        if self.m < 2 * self.k {
            return Err(Error::Argument(format!(
                "m = {} is too small: spark > 2k needs m >= 2k = {}",
                self.m,
                2 * self.k
            )));
        }
        if !(self.magnitude_mean > 0.0) || !(self.magnitude_std >= 0.0) {
            return Err(Error::Argument("injection magnitude mean must be > 0 and std >= 0".into()));
        }
        if let Some(t) = self.support_threshold {
            if !(t >= 0.0) {
                return Err(Error::Argument("support threshold must be >= 0".into()));
            }
        }
        if let Some(c) = &self.corruption {
            c.validate()?;
        }
        self.solver_config.validate()?;
        self.ga.validate()
    }

    pub fn solver_kind(&self) -> SolverKind {
        self.solver.unwrap_or(if self.corruption.is_some() { SolverKind::Bpdn } else { SolverKind::BasisPursuit })
    }

    /// Solver settings with the greedy sparsity defaulted to the stacked `2k`.
    pub fn effective_solver_config(&self) -> SolverConfig<f64> {
        let mut cfg = self.solver_config;
        if cfg.sparsity_k == 0 {
            cfg.sparsity_k = 2 * self.k;
        }
        cfg
    }

    /// GA parameters with the seed derived from the master seed.
    pub fn effective_ga(&self) -> GaParams {
        GaParams { rng_seed: derive_seed(self.seed, "design"), ..self.ga }
    }

    /// Corruption settings for one order and stream (`"noise"` or `"matrix"`).
    pub fn corruption_for(&self, stream: &str, order: u32) -> Option<CorruptionSpec> {
        self.corruption.map(|c| CorruptionSpec { rng_seed: derive_seed(self.seed, &format!("{stream}:{order}")), ..c })
    }
}

/// Splits a master seed into independent stage seeds (FNV-1a over the tag, then SplitMix64).
pub fn derive_seed(master: u64, tag: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in tag.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    let mut z = master ^ h;
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Case, per-order models and candidate matrices.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub case: NetworkCase,
    pub models: Vec<HarmonicOrderModel<f64>>,
    pub candidates: Vec<CandidateMatrix<f64>>,
}

impl Prepared {
    pub fn bus_ids(&self) -> Vec<i64> {
        self.case.buses.iter().map(|b| b.id).collect()
    }
}

pub fn prepare(case_path: &Path, orders: &[u32]) -> Result<Prepared> {
    let case = load_case(case_path).map_err(|e| e.at_stage("load"))?;
    let models = build_models::<f64>(&case, orders).map_err(|e| e.at_stage("model"))?;
    let candidates = models.iter().map(build_candidate_matrix).collect();
    Ok(Prepared { case, models, candidates })
}

/// Runs the GA, or rebuilds the design from the rows of a saved `design.json`.
pub fn design_stage(spec: &ExperimentSpec, prep: &Prepared) -> Result<SensingDesign<f64>> {
    let built = match &spec.design_path {
        Some(path) => load_design(path, prep, spec.k),
        None => ga_select_rows(&prep.candidates, spec.m, spec.k, &spec.effective_ga()),
    };
    built.map_err(|e| e.at_stage("design"))
}

pub fn load_design(path: &Path, prep: &Prepared, k: usize) -> Result<SensingDesign<f64>> {
    let file: DesignFile = read_json(path)?;
    let orders: Vec<u32> = prep.models.iter().map(|m| m.order).collect();
    if file.orders != orders {
        return Err(Error::Argument(format!(
            "{} was designed for orders {:?}, not {:?}",
            path.display(),
            file.orders,
            orders
        )));
    }
    SensingDesign::from_rows(&file.selected_rows, &prep.candidates, k)
}

/// A drawn scenario with its true bus voltages per order.
pub type ScenarioDraw = (InjectionScenario<f64>, Vec<DVector<Complex<f64>>>);

/// Draws the scenario and its true bus voltages.
pub fn scenario_stage(spec: &ExperimentSpec, prep: &Prepared) -> Result<ScenarioDraw> {
    let n = prep.case.n_buses();
    let scenario = make_injection_scenario::<f64>(
        n,
        spec.k,
        &spec.orders,
        spec.magnitude_mean,
        spec.magnitude_std,
        spec.corruption.as_ref(),
        derive_seed(spec.seed, "scenario"),
    )
    .map_err(|e| e.at_stage("scenario"))?;
    let voltages = prep.models.iter().zip(&scenario.injections).map(|(m, x)| &m.zbus * x).collect();
    Ok((scenario, voltages))
}

/// Forward-simulates the design rows for every order, adding measurement noise when corrupted.
pub fn simulate_stage(
    spec: &ExperimentSpec,
    prep: &Prepared,
    rows: &[usize],
    scenario: &InjectionScenario<f64>,
) -> Result<Vec<MeasurementSet<f64>>> {
    prep.candidates
        .iter()
        .zip(&scenario.injections)
        .map(|(cand, x)| simulate_rows(cand, rows, x, spec.corruption_for("noise", cand.order).as_ref()))
        .collect::<Result<Vec<_>>>()
        .map_err(|e| e.at_stage("simulate"))
}

/// Sensing matrices used for recovery: the design's own, perturbed once per order when corrupted.
pub fn recovery_matrices(spec: &ExperimentSpec, design: &SensingDesign<f64>) -> Vec<DMatrix<f64>> {
    design
        .orders
        .iter()
        .zip(&design.per_order_h)
        .map(|(&h, mat)| match spec.corruption_for("matrix", h) {
            Some(c) => corrupt_matrix(mat, &c),
            None => mat.clone(),
        })
        .collect()
}

/// Per-order support thresholds.
pub fn support_thresholds(spec: &ExperimentSpec, scenario: &InjectionScenario<f64>) -> Vec<f64> {
    if let Some(t) = spec.support_threshold {
        return vec![t; scenario.orders.len()];
    }
    if spec.corruption.is_none() {
        return vec![DEFAULT_SUPPORT_THRESHOLD; scenario.orders.len()];
    }
    scenario
        .background_std
        .iter()
        .map(|&s| {
            let t = BACKGROUND_THRESHOLD_FACTOR * s;
            if t > 0.0 {
                t
            } else {
                DEFAULT_SUPPORT_THRESHOLD
            }
        })
        .collect()
}

pub fn recover_stage(
    spec: &ExperimentSpec,
    design: &SensingDesign<f64>,
    measurements: &[MeasurementSet<f64>],
    models: &[HarmonicOrderModel<f64>],
    thresholds: &[f64],
) -> Result<HseEstimate<f64>> {
    let sensing = recovery_matrices(spec, design);
    estimate_with_matrices(
        &sensing,
        measurements,
        models,
        spec.solver_kind(),
        &spec.effective_solver_config(),
        thresholds,
    )
    .map_err(|e| e.at_stage("estimate"))
}

pub fn truth_of(
    scenario: &InjectionScenario<f64>,
    voltages: &[DVector<Complex<f64>>],
    bus_ids: Vec<i64>,
) -> GroundTruth<f64> {
    GroundTruth {
        orders: scenario.orders.clone(),
        injections: scenario.injections.clone(),
        voltages: voltages.to_vec(),
        support: Some(scenario.support.clone()),
        bus_ids,
    }
}

/// Everything produced by one run.
#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub design: SensingDesign<f64>,
    pub scenario: InjectionScenario<f64>,
    pub true_voltages: Vec<DVector<Complex<f64>>>,
    pub measurements: Vec<MeasurementSet<f64>>,
    pub estimate: HseEstimate<f64>,
    pub thresholds: Vec<f64>,
    pub report: EvaluationReport,
    pub bus_ids: Vec<i64>,
}

pub fn run_experiment(spec: &ExperimentSpec, out_dir: Option<&Path>) -> Result<ExperimentOutput> {
    spec.validate()?;
    let prep = prepare(&spec.case_path, &spec.orders)?;
    run_prepared(spec, &prep, out_dir)
}

/// Like [`run_experiment`] reusing already built models and candidates.
pub fn run_prepared(spec: &ExperimentSpec, prep: &Prepared, out_dir: Option<&Path>) -> Result<ExperimentOutput> {
    spec.validate()?;
    let design = design_stage(spec, prep)?;
    run_with_design(spec, prep, design, out_dir)
}

/// Runs every stage after design.
pub fn run_with_design(
    spec: &ExperimentSpec,
    prep: &Prepared,
    design: SensingDesign<f64>,
    out_dir: Option<&Path>,
) -> Result<ExperimentOutput> {
    let (scenario, true_voltages) = scenario_stage(spec, prep)?;
    let measurements = simulate_stage(spec, prep, &design.selected_rows, &scenario)?;
    let thresholds = support_thresholds(spec, &scenario);
    let estimate = recover_stage(spec, &design, &measurements, &prep.models, &thresholds)?;
    let bus_ids = prep.bus_ids();
    let truth = truth_of(&scenario, &true_voltages, bus_ids.clone());
    let report = evaluate(&truth, &estimate, &thresholds).map_err(|e| e.at_stage("evaluate"))?;
    let output =
        ExperimentOutput { design, scenario, true_voltages, measurements, estimate, thresholds, report, bus_ids };
    if let Some(dir) = out_dir {
        write_artifacts(spec, &output, dir).map_err(|e| e.at_stage("write"))?;
    }
    Ok(output)
}

pub fn write_artifacts(spec: &ExperimentSpec, out: &ExperimentOutput, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let ga = spec.design_path.is_none().then(|| spec.effective_ga());
    write_json(&dir.join("design.json"), &DesignFile::from_design(&out.design, ga))?;
    let scenario = ScenarioFile::new(spec.seed, &out.bus_ids, &out.scenario, &out.true_voltages);
    write_json(&dir.join("scenario.json"), &scenario)?;
    write_json(&dir.join("measurements.json"), &MeasurementsFile::new(spec.corruption, spec.seed, &out.measurements))?;
    write_json(&dir.join("estimate.json"), &EstimateFile::new(spec.solver_kind(), &out.estimate))?;
    write_json(&dir.join("report.json"), &report_file(spec, &out.thresholds, &out.report))?;
    let csv = report_csv(&scenario.truth(), &out.estimate);
    let path = dir.join("report.csv");
    std::fs::write(&path, csv).map_err(|e| Error::io(&path, e))
}

pub fn report_file(spec: &ExperimentSpec, thresholds: &[f64], report: &EvaluationReport) -> ReportFile {
    ReportFile {
        settings: serde_json::json!({
            "spec": spec,
            "solver": spec.solver_kind(),
            "support_thresholds": thresholds,
        }),
        evaluation: report.clone(),
    }
}
