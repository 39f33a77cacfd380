mod common;

use std::path::Path;
use std::process::{Command, Output};

use common::*;
use hse_core::artifacts::{DesignFile, ReportFile, CSV_HEADER};
use hse_core::network::load_case;

fn hse(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hse")).args(args).env_remove("HSE_OUT_DIR").output().unwrap()
}

fn hse_in(dir: &Path, args: &[&str]) -> Output {
    let mut full: Vec<&str> = args.to_vec();
    full.extend(["--out", dir.to_str().unwrap()]);
    hse(&full)
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn path(name: &str) -> String {
    data(name).to_str().unwrap().to_owned()
}

const QUICK_GA: [&str; 4] = ["--population", "12", "--generations", "8"];

#[test]
fn validate_bundled_case() {
    let o = hse(&["validate", &path("ieee118.json")]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).contains("118 buses, 177 lines, 9 transformers, 35 generators"));
}

#[test]
fn validate_missing_file() {
    let o = hse(&["validate", "/nonexistent/case.json"]);
    assert_eq!(code(&o), 3);
}

#[test]
fn validate_dangling_branch() {
    let dir = tempfile::tempdir().unwrap();
    let mut case = load_case(data("tiny3.json")).unwrap();
    case.branches[1].to = 999;
    let file = dir.path().join("dangling.json");
    std::fs::write(&file, serde_json::to_string_pretty(&case).unwrap()).unwrap();
    let o = hse(&["validate", file.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("999"), "{}", stderr(&o));
}

#[test]
fn design_rejects_too_few_monitors() {
    let dir = tempfile::tempdir().unwrap();
    let o = hse_in(dir.path(), &["design", &path("ieee118.json"), "--m", "10", "--k", "30"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("2k"), "{}", stderr(&o));
    assert!(!dir.path().join("design.json").exists());
}

#[test]
fn design_is_byte_identical_across_runs() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["design", &path("case5.json"), "--k", "2", "--m", "5", "--orders", "3,5,7", "--seed", "3"];
    for dir in [&a, &b] {
        let mut full = args.to_vec();
        full.extend(QUICK_GA);
        let o = hse_in(dir.path(), &full);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        assert!(stdout(&o).contains("spark certified"));
    }
    let da = std::fs::read(a.path().join("design.json")).unwrap();
    let db = std::fs::read(b.path().join("design.json")).unwrap();
    assert_eq!(da, db);
}

#[test]
fn design_on_ieee118_places_sixty_monitors() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["design", &path("ieee118.json")].into_iter().map(String::from).collect::<Vec<_>>();
    args.extend(
        ["--k", "30", "--m", "60", "--seed", "7", "--population", "10", "--generations", "2"].map(String::from),
    );
    let refs: Vec<&str> = args.iter().map(String::as_str).collect();
    let o = hse_in(dir.path(), &refs);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let file: DesignFile = serde_json::from_slice(&std::fs::read(dir.path().join("design.json")).unwrap()).unwrap();
    assert_eq!(file.selected_rows.len(), 60);
    assert_eq!(file.placements.len(), 60);
    assert_eq!(file.counts.voltage + file.counts.current, 60);
    assert_eq!(file.orders, (3..=23).step_by(2).collect::<Vec<u32>>());
}

#[test]
fn run_without_sources_reports_zero_errors() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["run", &path("tiny3.json")].into_iter().map(String::from).collect::<Vec<_>>();
    args.extend(["--k", "0", "--m", "2", "--orders", "3,5"].map(String::from));
    args.extend(QUICK_GA.map(String::from));
    let refs: Vec<&str> = args.iter().map(String::as_str).collect();
    let o = hse_in(dir.path(), &refs);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let report: ReportFile = serde_json::from_slice(&std::fs::read(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report.evaluation.max_current_error, 0.0);
    assert_eq!(report.evaluation.max_voltage_error, 0.0);
    assert_eq!(report.evaluation.min_recall, 1.0);
    for name in ["design.json", "scenario.json", "measurements.json", "estimate.json", "report.json", "report.csv"] {
        assert!(dir.path().join(name).exists(), "{name}");
    }
    let csv = std::fs::read_to_string(dir.path().join("report.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), CSV_HEADER);
    assert_eq!(csv.lines().count(), 1 + 2 * 3);
    assert!(stdout(&o).contains("min recall 1.0000"));
}

#[test]
fn stage_failure_exits_with_four() {
    let dir = tempfile::tempdir().unwrap();
    let mut case = load_case(data("tiny3.json")).unwrap();
    case.generators.clear();
    let file = dir.path().join("floating.json");
    std::fs::write(&file, serde_json::to_string(&case).unwrap()).unwrap();
    let o = hse_in(dir.path(), &["run", file.to_str().unwrap(), "--k", "1", "--m", "2", "--orders", "3"]);
    assert_eq!(code(&o), 4);
    assert!(stderr(&o).contains("model"), "{}", stderr(&o));
}

#[test]
fn help_on_every_subcommand() {
    for sub in ["validate", "design", "simulate", "recover", "run", "report"] {
        let o = hse(&[sub, "--help"]);
        assert_eq!(code(&o), 0, "{sub}");
        assert!(stdout(&o).contains("Usage"), "{sub}");
    }
    assert_eq!(code(&hse(&["--help"])), 0);
}

#[test]
fn unknown_flags_are_rejected() {
    assert_eq!(code(&hse(&["validate", &path("tiny3.json"), "--bogus"])), 2);
    assert_eq!(code(&hse(&["frobnicate"])), 2);
}

#[test]
fn staged_commands_chain() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let case = path("case5.json");
    let problem = ["--k", "1", "--m", "4", "--orders", "3,5,7", "--seed", "2"];

    let mut args = vec!["design", case.as_str()];
    args.extend(problem);
    args.extend(QUICK_GA);
    assert_eq!(code(&hse_in(dir.path(), &args)), 0);

    let design = format!("{d}/design.json");
    let mut args = vec!["simulate", case.as_str(), "--design", &design];
    args.extend(problem);
    let o = hse_in(dir.path(), &args);
    assert_eq!(code(&o), 0, "{}", stderr(&o));

    let meas = format!("{d}/measurements.json");
    let o = hse_in(dir.path(), &["recover", &case, "--design", &design, "--measurements", &meas, "--solver", "bp"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).contains("3 orders recovered, 0 failed"));

    let o = hse(&["report", d]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let report: ReportFile = serde_json::from_slice(&std::fs::read(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report.evaluation.per_order.len(), 3);
    assert!(report.evaluation.per_order.iter().all(|o| o.true_sources.len() == 1));
    assert!(dir.path().join("report.csv").exists());
}

#[test]
fn output_directory_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("from-env");
    let mut args = vec!["design", &path("tiny3.json")].into_iter().map(String::from).collect::<Vec<_>>();
    args.extend(["--k", "1", "--m", "2", "--orders", "3"].map(String::from));
    args.extend(QUICK_GA.map(String::from));
    let o = Command::new(env!("CARGO_BIN_EXE_hse")).args(&args).env("HSE_OUT_DIR", &target).output().unwrap();
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(target.join("design.json").exists());
}
