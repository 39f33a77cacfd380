mod common;

use common::*;
use hse_core::design::{
    count_placements, design_objective, extract_monitors, ga_select_rows, group_by_location, identity_candidates,
    GaParams, MonitorKind, SensingDesign,
};
use hse_core::linalg::complex_rank;
use hse_core::measurement::{build_candidate_matrix, CandidateMatrix, RowTag};
use hse_core::network::{build_models, load_case};
use hse_core::Error;
use itertools::Itertools;
use nalgebra::DMatrix;
use proptest::prelude::*;

fn real_candidates(order: u32, rows: &[&[f64]]) -> CandidateMatrix<f64> {
    let n = rows[0].len();
    CandidateMatrix {
        order,
        rows: DMatrix::from_fn(rows.len(), n, |i, j| C::new(rows[i][j], 0.0)),
        row_tags: (0..rows.len()).map(|i| RowTag::VoltageAt { index: i, bus: i as i64 + 1 }).collect(),
    }
}

/// Two unit columns at angle `acos(c)`.
fn with_coherence(order: u32, c: f64) -> CandidateMatrix<f64> {
    real_candidates(order, &[&[1.0, c], &[0.0, (1.0 - c * c).sqrt()]])
}

fn random_candidates(seed: u64, rows: usize, cols: usize, order: u32) -> CandidateMatrix<f64> {
    CandidateMatrix {
        order,
        rows: complex_matrix(&mut rng(seed), rows, cols),
        row_tags: (0..rows).map(|i| RowTag::VoltageAt { index: i, bus: i as i64 }).collect(),
    }
}

fn ga(seed: u64) -> GaParams {
    GaParams { rng_seed: seed, ..GaParams::default() }
}

#[test]
fn objective_examples() {
    let id = [identity_candidates::<f64>(4, 1), identity_candidates::<f64>(4, 3)];
    assert_eq!(design_objective(&[0, 1, 2, 3], &id).unwrap(), 0.0);

    let dup = real_candidates(1, &[&[1.0, 2.0], &[3.0, 6.0]]);
    assert!((design_objective(&[0, 1], &[dup]).unwrap() - 1.0).abs() < 1e-12);

    let pair = [with_coherence(1, 0.5), with_coherence(3, 0.3)];
    assert!((design_objective(&[0, 1], &pair).unwrap() - 0.6).abs() < 1e-12);
}

#[test]
fn zero_column_selection_scores_infinite() {
    let id = [identity_candidates::<f64>(4, 1)];
    assert_eq!(design_objective(&[0, 1], &id).unwrap(), f64::INFINITY);
}

#[test]
fn objective_is_a_set_function() {
    let c = [random_candidates(1, 12, 4, 3), random_candidates(2, 12, 4, 5)];
    let base = design_objective(&[1, 4, 7, 9, 10], &c).unwrap();
    for perm in [1usize, 4, 7, 9, 10].into_iter().permutations(5).take(30) {
        assert!((design_objective(&perm, &c).unwrap() - base).abs() <= 1e-14);
    }
}

#[test]
fn identity_candidates_select_everything() {
    let c = [identity_candidates::<f64>(5, 1)];
    let d = ga_select_rows(&c, 5, 2, &ga(3)).unwrap();
    assert_eq!(d.selected_rows, vec![0, 1, 2, 3, 4]);
    assert_eq!(d.objective, 0.0);
    assert!(d.spark_certified);
}

fn exhaustive_best(c: &[CandidateMatrix<f64>], m: usize) -> f64 {
    (0..c[0].n_rows()).combinations(m).map(|rows| design_objective(&rows, c).unwrap()).fold(f64::INFINITY, f64::min)
}

#[test]
fn ga_matches_exhaustive_search_on_six_rows() {
    let c = [random_candidates(40, 6, 3, 1)];
    assert_eq!((0..6).combinations(3).count(), 20);
    let best = exhaustive_best(&c, 3);
    for seed in 0..3 {
        let d = ga_select_rows(&c, 3, 1, &ga(seed)).unwrap();
        assert!((d.objective - best).abs() <= 1e-12, "seed {seed}: {} vs {best}", d.objective);
    }
}

#[test]
fn ga_near_exhaustive_optimum_on_small_instances() {
    let mut within = 0;
    for inst in 0..6u64 {
        let c = [random_candidates(100 + inst, 9, 3, 3), random_candidates(200 + inst, 9, 3, 5)];
        let best = exhaustive_best(&c, 4);
        let small = GaParams { population_size: 30, generations: 40, rng_seed: inst, ..GaParams::default() };
        let d = ga_select_rows(&c, 4, 2, &small).unwrap();
        assert!(d.objective >= best - 1e-12);
        let ratio = d.objective / best;
        if ratio <= 1.05 {
            within += 1;
        }
        eprintln!("instance {inst}: ga {:.6} exhaustive {best:.6} ratio {ratio:.4}", d.objective);
    }
    eprintln!("{within}/6 instances within 5% of the exhaustive optimum");
}

#[test]
fn ga_is_deterministic_and_monotone() {
    let case = load_case(data("case5.json")).unwrap();
    let c: Vec<_> = build_models::<f64>(&case, &[3, 5, 7]).unwrap().iter().map(build_candidate_matrix).collect();
    let p = GaParams { population_size: 20, generations: 25, rng_seed: 9, ..GaParams::default() };
    let a = ga_select_rows(&c, 4, 2, &p).unwrap();
    let b = ga_select_rows(&c, 4, 2, &p).unwrap();
    assert_eq!(a.selected_rows, b.selected_rows);
    assert_eq!(a.best_fitness_history, b.best_fitness_history);
    assert_eq!(a.best_fitness_history.len(), 26);
    for w in a.best_fitness_history.windows(2) {
        assert!(w[1] <= w[0]);
    }
    assert_eq!(*a.best_fitness_history.last().unwrap(), a.objective);
}

#[test]
fn returned_designs_are_full_rank() {
    let case = load_case(data("case5.json")).unwrap();
    let c: Vec<_> = build_models::<f64>(&case, &[3, 11]).unwrap().iter().map(build_candidate_matrix).collect();
    for (m, k) in [(2, 1), (4, 2), (6, 3), (11, 2)] {
        let d = ga_select_rows(&c, m, k, &GaParams { generations: 20, ..ga(m as u64) }).unwrap();
        assert_eq!(d.n_rows(), m);
        assert!(d.is_full_rank());
        for (cand, h) in c.iter().zip(&d.per_order_h) {
            let rank = complex_rank(&cand.select(&d.selected_rows), 1e-10);
            assert_eq!(rank, m.min(5));
            assert_eq!(h.shape(), (2 * m, 10));
        }
    }
}

#[test]
fn ga_argument_errors() {
    let c = [identity_candidates::<f64>(6, 1)];
    assert!(matches!(ga_select_rows(&c, 3, 2, &ga(0)), Err(Error::Argument(_))));
    assert!(matches!(ga_select_rows(&c, 7, 1, &ga(0)), Err(Error::Argument(_))));
    let bad = GaParams { mutation_rate: 1.5, ..ga(0) };
    assert!(matches!(ga_select_rows(&c, 4, 1, &bad), Err(Error::Argument(_))));
    let bad = GaParams { population_size: 1, ..ga(0) };
    assert!(matches!(ga_select_rows(&c, 4, 1, &bad), Err(Error::Argument(_))));
}

#[test]
fn rank_infeasible_candidates_fail_with_diagnostics() {
    // every row is a multiple of the first, so no two rows are independent
    let c = [real_candidates(1, &[&[1.0, 2.0], &[2.0, 4.0], &[-1.0, -2.0], &[3.0, 6.0]])];
    match ga_select_rows(&c, 2, 1, &GaParams { generations: 5, ..ga(0) }) {
        Err(Error::DesignInfeasible { deficient_orders, .. }) => assert_eq!(deficient_orders, vec![1]),
        other => panic!("expected infeasible design, got {other:?}"),
    }
}

#[test]
fn monitor_extraction() {
    let case = load_case(data("case5.json")).unwrap();
    let c = build_candidate_matrix(&build_models::<f64>(&case, &[5]).unwrap()[0]);
    let volts = extract_monitors(&[0, 1, 2, 3, 4], &c);
    assert!(volts.iter().all(|p| p.kind == MonitorKind::Voltage));
    let currents = extract_monitors(&[5, 6, 7, 8, 9, 10], &c);
    assert!(currents.iter().all(|p| p.kind == MonitorKind::Current));
    assert_eq!(currents[5].branch, Some(5));
    assert_eq!((currents[5].bus, currents[5].to), (4, Some(5)));
    let mixed = extract_monitors(&[1, 6, 9], &c);
    assert_eq!(mixed.len(), 3);
    let counts = count_placements(&mixed);
    assert_eq!((counts.voltage, counts.current), (1, 2));
    let groups = group_by_location(&mixed);
    assert_eq!(groups[&2], vec![1]);
}

#[test]
fn hand_made_design_validation() {
    let c = [identity_candidates::<f64>(4, 1)];
    assert!(SensingDesign::from_rows(&[0, 0], &c, 1).is_err());
    assert!(SensingDesign::from_rows(&[9], &c, 1).is_err());
    assert!(SensingDesign::from_rows(&[], &c, 1).is_err());
    let d = SensingDesign::from_rows(&[3, 1, 2], &c, 1).unwrap();
    assert_eq!(d.selected_rows, vec![1, 2, 3]);
}

#[test]
fn single_precision_design() {
    let c = [identity_candidates::<f32>(3, 1)];
    let d = ga_select_rows(&c, 3, 1, &GaParams { generations: 5, ..ga(1) }).unwrap();
    assert_eq!(d.objective, 0.0f32);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn history_never_increases(seed in any::<u64>(), m in 3usize..7) {
        let c = [random_candidates(seed, 10, 3, 1), random_candidates(seed ^ 1, 10, 3, 3)];
        let p = GaParams { population_size: 12, generations: 15, rng_seed: seed, ..GaParams::default() };
        let d = ga_select_rows(&c, m, 1, &p).unwrap();
        for w in d.best_fitness_history.windows(2) {
            prop_assert!(w[1] <= w[0]);
        }
        prop_assert!(d.selected_rows.windows(2).all(|w| w[0] < w[1]));
        prop_assert_eq!(d.selected_rows.len(), m);
    }
}
