//! Command-line front end.
//!
//! Exit codes: 0 success, 2 validation or argument error, 3 I/O error, 4 stage failure.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::artifacts::{read_json, report_csv, write_json, DesignFile, EstimateFile, MeasurementsFile, ScenarioFile};
use crate::design::GaParams;
use crate::error::{Error, Result};
use crate::experiment::{
    default_orders, design_stage, load_design, prepare, recover_stage, report_file, run_experiment, scenario_stage,
    simulate_stage, support_thresholds, ExperimentSpec, DEFAULT_EPSILON,
};
use crate::hse::{evaluate, EvaluationReport};
use crate::measurement::CorruptionSpec;
use crate::network::load_case;
use crate::recovery::{SolverConfig, SolverKind};

pub const EXIT_OK: u8 = 0;
pub const EXIT_INVALID: u8 = 2;
pub const EXIT_IO: u8 = 3;
pub const EXIT_STAGE: u8 = 4;

#[derive(Debug, Parser)]
#[command(name = "hse", version, about = "Compressive-sensing harmonic state estimation")]
pub struct Cli {
    /// Print stage progress to stderr (repeat for more).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a case file and print its summary.
    Validate { case: PathBuf },
    /// Select monitor rows with the genetic algorithm and write design.json.
    Design {
        case: PathBuf,
        #[command(flatten)]
        problem: ProblemArgs,
        #[command(flatten)]
        ga: GaArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Draw a scenario and write scenario.json and measurements.json for a design.
    Simulate {
        case: PathBuf,
        #[arg(long)]
        design: PathBuf,
        #[command(flatten)]
        problem: ProblemArgs,
        #[command(flatten)]
        noise: NoiseArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Recover injections from measurements.json and write estimate.json.
    Recover {
        case: PathBuf,
        #[arg(long)]
        design: PathBuf,
        #[arg(long)]
        measurements: PathBuf,
        #[command(flatten)]
        solver: SolverArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Full pipeline: design, simulate, recover, evaluate.
    Run {
        case: PathBuf,
        #[command(flatten)]
        problem: ProblemArgs,
        #[command(flatten)]
        ga: GaArgs,
        #[command(flatten)]
        noise: NoiseArgs,
        #[command(flatten)]
        solver: SolverArgs,
        /// Reuse a saved design instead of running the GA.
        #[arg(long)]
        design: Option<PathBuf>,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Evaluate scenario.json against estimate.json and write report.json and report.csv.
    Report {
        /// Directory holding scenario.json, measurements.json and estimate.json.
        dir: PathBuf,
        #[arg(long)]
        support_threshold: Option<f64>,
    },
}

#[derive(Debug, Args)]
pub struct ProblemArgs {
    /// Number of harmonic sources.
    #[arg(long, default_value_t = 30)]
    pub k: usize,
    /// Number of monitor channels.
    #[arg(long, default_value_t = 60)]
    pub m: usize,
    /// Harmonic orders, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = default_orders())]
    pub orders: Vec<u32>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Mean source magnitude at the 3rd order (p.u.).
    #[arg(long, default_value_t = 0.2)]
    pub magnitude_mean: f64,
    #[arg(long, default_value_t = 0.05)]
    pub magnitude_std: f64,
}

#[derive(Debug, Args)]
pub struct GaArgs {
    #[arg(long, default_value_t = 100)]
    pub population: usize,
    #[arg(long, default_value_t = 300)]
    pub generations: usize,
    #[arg(long, default_value_t = 0.9)]
    pub crossover_rate: f64,
    #[arg(long, default_value_t = 0.05)]
    pub mutation_rate: f64,
    #[arg(long, default_value_t = 2)]
    pub elitism: usize,
}

impl GaArgs {
    fn params(&self) -> GaParams {
        GaParams {
            population_size: self.population,
            generations: self.generations,
            crossover_rate: self.crossover_rate,
            mutation_rate: self.mutation_rate,
            elitism_count: self.elitism,
            rng_seed: 0,
        }
    }
}

#[derive(Debug, Args)]
pub struct NoiseArgs {
    /// Clean measurements, exact matrix, no background injections (default).
    #[arg(long, conflicts_with = "corrupt")]
    pub noise_free: bool,
    /// Apply measurement noise, matrix error and background injections at this fraction.
    #[arg(long)]
    pub corrupt: Option<f64>,
}

impl NoiseArgs {
    fn corruption(&self) -> Option<CorruptionSpec> {
        self.corrupt.map(|level| CorruptionSpec::uniform(level, 0))
    }
}

#[derive(Debug, Args)]
pub struct SolverArgs {
    /// One of l0, bp, bp-l1, bp-linf, bpdn, lasso, dantzig, omp, cosamp, iht.
    #[arg(long)]
    pub solver: Option<SolverKind>,
    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 0.01)]
    pub lambda: f64,
    #[arg(long, default_value_t = 10_000)]
    pub max_iterations: usize,
    /// Greedy sparsity (default 2k on the stacked system).
    #[arg(long)]
    pub sparsity: Option<usize>,
    #[arg(long)]
    pub support_threshold: Option<f64>,
}

impl SolverArgs {
    fn config(&self) -> SolverConfig<f64> {
        SolverConfig {
            epsilon: self.epsilon,
            lambda: self.lambda,
            max_iterations: self.max_iterations,
            sparsity_k: self.sparsity.unwrap_or(0),
            ..SolverConfig::default()
        }
    }
}

#[derive(Debug, Args)]
pub struct OutArgs {
    /// Output directory.
    #[arg(long, env = "HSE_OUT_DIR", default_value = "hse-out")]
    pub out: PathBuf,
}

fn problem_spec(case: &Path, p: &ProblemArgs) -> ExperimentSpec {
    ExperimentSpec {
        case_path: case.to_path_buf(),
        orders: p.orders.clone(),
        k: p.k,
        m: p.m,
        magnitude_mean: p.magnitude_mean,
        magnitude_std: p.magnitude_std,
        seed: p.seed,
        ..ExperimentSpec::default()
    }
}

/// Maps an error to its exit code. Stage failures give 4 unless caused by I/O.
pub fn exit_code(err: &Error) -> u8 {
    match (err, err.root()) {
        (_, Error::Io { .. }) => EXIT_IO,
        (Error::Stage { .. }, _) => EXIT_STAGE,
        (_, Error::Format { .. } | Error::Validation(_) | Error::Argument(_)) => EXIT_INVALID,
        _ => EXIT_STAGE,
    }
}

/// Parses arguments and runs; clap handles `--help` and usage errors itself.
pub fn main_entry() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(text) => {
            print!("{text}");
            ExitCode::from(EXIT_OK)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn progress(cli: &Cli, msg: impl AsRef<str>) {
    if cli.verbose > 0 {
        eprintln!("{}", msg.as_ref());
    }
}

/// Runs one command and returns the text for stdout.
pub fn execute(cli: &Cli) -> Result<String> {
    match &cli.command {
        Command::Validate { case } => {
            let case = load_case(case)?;
            Ok(format!("{}\n", case.summary()))
        }
        Command::Design { case, problem, ga, out } => {
            let spec = ExperimentSpec { ga: ga.params(), ..problem_spec(case, problem) };
            spec.validate()?;
            progress(cli, "building models");
            let prep = prepare(case, &spec.orders).map_err(strip_stage)?;
            progress(cli, format!("running GA ({} x {})", spec.ga.population_size, spec.ga.generations));
            let design = design_stage(&spec, &prep).map_err(strip_stage)?;
            create_dir(&out.out)?;
            let file = DesignFile::from_design(&design, Some(spec.effective_ga()));
            write_json(&out.out.join("design.json"), &file)?;
            let mut s = String::new();
            let _ = writeln!(s, "objective: {:.6}", file.objective);
            let _ = writeln!(s, "placements: {} voltage, {} current", file.counts.voltage, file.counts.current);
            let _ = writeln!(s, "devices: {}", file.devices.len());
            let _ = writeln!(s, "spark certified: {}", file.spark_certified);
            let _ = writeln!(s, "wrote {}", out.out.join("design.json").display());
            Ok(s)
        }
        Command::Simulate { case, design, problem, noise, out } => {
            let spec = ExperimentSpec { corruption: noise.corruption(), ..problem_spec(case, problem) };
            spec.validate()?;
            let prep = prepare(case, &spec.orders).map_err(strip_stage)?;
            let design = load_design(design, &prep, spec.k)?;
            let (scenario, voltages) = scenario_stage(&spec, &prep).map_err(strip_stage)?;
            let sets = simulate_stage(&spec, &prep, &design.selected_rows, &scenario).map_err(strip_stage)?;
            create_dir(&out.out)?;
            write_json(
                &out.out.join("scenario.json"),
                &ScenarioFile::new(spec.seed, &prep.bus_ids(), &scenario, &voltages),
            )?;
            write_json(&out.out.join("measurements.json"), &MeasurementsFile::new(spec.corruption, spec.seed, &sets))?;
            Ok(format!(
                "{} sources over {} orders; wrote scenario.json and measurements.json to {}\n",
                scenario.support.len(),
                scenario.orders.len(),
                out.out.display()
            ))
        }
        Command::Recover { case, design, measurements, solver, out } => {
            let meas: MeasurementsFile = read_json(measurements)?;
            let saved: DesignFile = read_json(design)?;
            let spec = ExperimentSpec {
                case_path: case.clone(),
                orders: saved.orders.clone(),
                k: saved.sparsity_k,
                m: saved.selected_rows.len(),
                corruption: meas.corruption,
                seed: meas.master_seed,
                solver: solver.solver,
                solver_config: solver.config(),
                support_threshold: solver.support_threshold,
                ..ExperimentSpec::default()
            };
            spec.validate()?;
            let prep = prepare(case, &spec.orders).map_err(strip_stage)?;
            let design = load_design(design, &prep, spec.k)?;
            let sets = meas.sets();
            let thresholds = match spec.support_threshold {
                Some(t) => vec![t; sets.len()],
                None if spec.corruption.is_none() => vec![crate::hse::DEFAULT_SUPPORT_THRESHOLD; sets.len()],
                None => {
                    return Err(Error::Argument(
                        "corrupted measurements need --support-threshold (the default rule needs the scenario)".into(),
                    ))
                }
            };
            let est = recover_stage(&spec, &design, &sets, &prep.models, &thresholds).map_err(strip_stage)?;
            create_dir(&out.out)?;
            write_json(&out.out.join("estimate.json"), &EstimateFile::new(spec.solver_kind(), &est))?;
            let failed = est.orders.iter().filter(|o| o.failure.is_some()).count();
            Ok(format!(
                "solver {}: {} orders recovered, {} failed; wrote {}\n",
                spec.solver_kind(),
                est.orders.len() - failed,
                failed,
                out.out.join("estimate.json").display()
            ))
        }
        Command::Run { case, problem, ga, noise, solver, design, out } => {
            let spec = ExperimentSpec {
                ga: ga.params(),
                corruption: noise.corruption(),
                solver: solver.solver,
                solver_config: solver.config(),
                support_threshold: solver.support_threshold,
                design_path: design.clone(),
                ..problem_spec(case, problem)
            };
            spec.validate()?;
            progress(cli, format!("running experiment with seed {}", spec.seed));
            let output = run_experiment(&spec, Some(&out.out))?;
            let mut s = summary_table(&output.report);
            let _ = writeln!(s, "wrote artifacts to {}", out.out.display());
            Ok(s)
        }
        Command::Report { dir, support_threshold } => {
            let scenario: ScenarioFile = read_json(&dir.join("scenario.json"))?;
            let est_file: EstimateFile = read_json(&dir.join("estimate.json"))?;
            let meas: MeasurementsFile = read_json(&dir.join("measurements.json"))?;
            let spec = ExperimentSpec {
                orders: scenario.orders.iter().map(|o| o.order).collect(),
                k: scenario.support.len(),
                m: meas.orders.first().map_or(0, |o| o.rows.len()).max(2 * scenario.support.len()),
                corruption: meas.corruption,
                seed: meas.master_seed,
                solver: Some(est_file.solver),
                support_threshold: *support_threshold,
                ..ExperimentSpec::default()
            };
            let truth = scenario.truth();
            let est = est_file.estimate();
            let thresholds = support_thresholds(&spec, &scenario.scenario());
            let report = evaluate(&truth, &est, &thresholds)?;
            write_json(&dir.join("report.json"), &report_file(&spec, &thresholds, &report))?;
            let path = dir.join("report.csv");
            std::fs::write(&path, report_csv(&truth, &est)).map_err(|e| Error::io(&path, e))?;
            Ok(summary_table(&report))
        }
    }
}

fn strip_stage(e: Error) -> Error {
    match e {
        Error::Stage { source, .. } => strip_stage(*source),
        other => other,
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Fixed-width per-order summary of an evaluation.
pub fn summary_table(r: &EvaluationReport) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:>5} {:>9} {:>9} {:>12} {:>12} {:>6} {:>6}",
        "order", "precision", "recall", "max |dX|", "max |d|V||", "false", "missed"
    );
    for o in &r.per_order {
        let _ = write!(
            s,
            "{:>5} {:>9.4} {:>9.4} {:>12.4e} {:>12.4e} {:>6} {:>6}",
            o.order,
            o.precision,
            o.recall,
            o.max_current_error,
            o.max_voltage_error,
            o.false_sources.len(),
            o.missed_sources.len()
        );
        if let Some(f) = &o.solver_failure {
            let _ = write!(s, "  solver failed: {f}");
        }
        s.push('\n');
    }
    let _ = writeln!(
        s,
        "min precision {:.4}, min recall {:.4}, max current error {:.4e}, max voltage error {:.4e}, all sources detected: {}",
        r.min_precision, r.min_recall, r.max_current_error, r.max_voltage_error, r.all_sources_detected
    );
    s
}
