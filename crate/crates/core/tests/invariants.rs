//! Property tests for structural invariants, plus reproducibility of the
//! experiment outputs.

use std::f64::consts::TAU;

use cyclic_intensity::coefficients::{fit_coefficients, symmetric_frequencies};
use cyclic_intensity::experiments::{
    aggregate, run_convergence, run_dynrange, run_sawtooth, ConvergenceConfig, DynRangeConfig, ReplicateRecord,
    SawtoothConfig, Summary,
};
use cyclic_intensity::periodogram::{evaluate_periodogram, find_peaks, DirectSum, Region};
use cyclic_intensity::recovery::extract_peaks;
use cyclic_intensity::{simulate_nhpp, Component, EventSeries, GapRule, RateModel, RngStream, WindowKind, WindowSpec};
use proptest::prelude::*;

fn sorted_times(raw: Vec<f64>, horizon: f64) -> EventSeries {
    let mut t: Vec<f64> = raw.into_iter().map(|x| x * horizon).filter(|&x| x > 0.0 && x < horizon).collect();
    t.sort_by(f64::total_cmp);
    t.dedup();
    EventSeries::new(t, horizon).unwrap()
}

fn window_kind() -> impl Strategy<Value = WindowKind> {
    prop_oneof![Just(WindowKind::Rectangle), Just(WindowKind::Hann), Just(WindowKind::Cos4)]
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn region_removal_excludes_interval_and_keeps_the_rest(
        cuts in prop::collection::vec((0.0f64..1.0, 0.0f64..0.2), 1..8),
        probes in prop::collection::vec(0.0f64..1.0, 20),
    ) {
        let mut region = Region::new(0.0, 1.0);
        for &(a, w) in &cuts {
            region.remove_open(a, a + w);
        }
        for &p in &probes {
            let removed = cuts.iter().any(|&(a, w)| a < p && p < a + w);
            prop_assert_eq!(region.contains(p), !removed);
        }
        for pair in region.intervals().windows(2) {
            prop_assert!(pair[0].1 <= pair[1].0);
        }
    }

    #[test]
    fn periodogram_is_conjugate_symmetric(
        raw in prop::collection::vec(0.0f64..1.0, 1..60),
        horizon in 10.0f64..100.0,
        nu in 0.0f64..0.5,
        kind in window_kind(),
        centralized: bool,
    ) {
        let ev = sorted_times(raw, horizon);
        prop_assume!(!ev.is_empty());
        let sum = DirectSum::new(&ev, WindowSpec::new(kind, horizon).unwrap(), centralized).unwrap();
        let (a, b) = (sum.eval(nu), sum.eval(-nu));
        prop_assert!((a - b.conj()).norm() <= 1e-9 * (1.0 + a.norm()));
    }

    #[test]
    fn window_transform_is_conjugate_symmetric(kind in window_kind(), horizon in 1.0f64..500.0, x in -50.0f64..50.0) {
        let w = WindowSpec::new(kind, horizon).unwrap();
        let nu = x / horizon;
        let (a, b) = (w.transform(nu), w.transform(-nu));
        prop_assert!((a - b.conj()).norm() <= 1e-12 * horizon);
    }

    #[test]
    fn fitted_coefficients_are_conjugate_pairs(
        raw in prop::collection::vec(0.0f64..1.0, 50..200),
        f1 in 0.05f64..0.2,
        gap in 0.05f64..0.2,
    ) {
        let ev = sorted_times(raw, 100.0);
        let fit = fit_coefficients(&ev, &[f1, f1 + gap], 0.5, false).unwrap();
        prop_assert_eq!(fit.frequencies.clone(), symmetric_frequencies(&[f1, f1 + gap]));
        prop_assert!(fit.coefficients[0].im.abs() < 1e-9);
        for k in 0..2 {
            let (p, m) = (fit.coefficients[1 + 2 * k], fit.coefficients[2 + 2 * k]);
            prop_assert!((p - m.conj()).norm() < 1e-9);
        }
    }

    #[test]
    fn extracted_peaks_respect_radius_and_threshold(
        raw in prop::collection::vec(0.0f64..1.0, 20..150),
        radius in 1.0f64..4.0,
        threshold in 0.0f64..3.0,
    ) {
        let horizon = 80.0;
        let ev = sorted_times(raw, horizon);
        prop_assume!(!ev.is_empty());
        let grid = evaluate_periodogram(&ev, WindowSpec::new(WindowKind::Hann, horizon).unwrap(), 0.5, 8, true).unwrap();
        let peaks = extract_peaks(&grid, radius, threshold, 20);
        for (i, &(f, m)) in peaks.iter().enumerate() {
            prop_assert!(m > threshold);
            prop_assert!(f > 0.0 && f <= 0.5);
            for &(g, _) in &peaks[..i] {
                prop_assert!((f - g).abs() >= radius / horizon * (1.0 - 1e-9));
            }
        }
        for pair in peaks.windows(2) {
            prop_assert!(pair[0].1 >= pair[1].1 - 1e-12);
        }
    }

    #[test]
    fn grid_peaks_are_local_maxima(raw in prop::collection::vec(0.0f64..1.0, 10..100)) {
        let horizon = 60.0;
        let ev = sorted_times(raw, horizon);
        prop_assume!(!ev.is_empty());
        let grid = evaluate_periodogram(&ev, WindowSpec::new(WindowKind::Hann, horizon).unwrap(), 0.5, 8, true).unwrap();
        let step = grid.grid_step();
        for p in find_peaks(&grid, &Region::new(0.0, 0.5)).iter() {
            prop_assert!(grid.magnitude_at(p.frequency) >= grid.magnitude_at(p.frequency - step) - 1e-9);
            prop_assert!(grid.magnitude_at(p.frequency) >= grid.magnitude_at(p.frequency + step) - 1e-9);
        }
    }

    #[test]
    fn summaries_match_their_records(
        errors in prop::collection::vec(prop::option::of(0.0f64..1.0), 1..30),
    ) {
        let records: Vec<ReplicateRecord> = errors
            .iter()
            .enumerate()
            .map(|(i, e)| ReplicateRecord {
                scenario: "s".into(),
                method: "m".into(),
                horizon: 100.0,
                replicate: i,
                seed: 1,
                stream: i as u64,
                frequencies: vec![],
                max_error: *e,
                missed: Some(0),
                mse: *e,
                correct: i % 3,
                spurious: i % 2,
                target_detected: None,
                status: if e.is_some() { "ok".into() } else { "singular".into() },
            })
            .collect();
        let aggs = aggregate(&records);
        prop_assert_eq!(aggs.len(), 1);
        let a = &aggs[0];
        let ok: Vec<f64> = errors.iter().flatten().copied().collect();
        prop_assert_eq!(a.replicates, errors.len());
        prop_assert_eq!(a.failures, errors.len() - ok.len());
        prop_assert_eq!(a.max_error, Summary::of(&ok));
        if let Some(s) = a.max_error {
            let mean = ok.iter().sum::<f64>() / ok.len() as f64;
            prop_assert!((s.mean - mean).abs() < 1e-12);
            prop_assert!(ok.iter().all(|&v| v >= 0.0) && s.se >= 0.0);
        }
    }

    #[test]
    fn simulated_events_are_sorted_and_inside_horizon(seed: u64, dc in 1.0f64..10.0, frac in 0.0f64..1.0) {
        let horizon = 50.0;
        let model = RateModel::new(dc, vec![Component::new(0.1, frac * dc, 0.3)], 0.5, horizon).unwrap();
        let ev = simulate_nhpp(&model, horizon, RngStream::new(seed, 0)).unwrap();
        let t = ev.timestamps();
        prop_assert!(t.windows(2).all(|p| p[0] < p[1]));
        prop_assert!(t.iter().all(|&x| x > 0.0 && x <= horizon));
    }

    #[test]
    fn nonnegativity_check_agrees_with_amplitude_budget(dc in 1.0f64..5.0, amp in 0.0f64..8.0, phase in 0.0f64..TAU) {
        let model = RateModel::from_estimate(dc, vec![Component::new(0.05, amp, phase)], 0.5, 200.0).unwrap();
        // A single cosine over ten full periods reaches dc - amp.
        prop_assume!((amp - dc).abs() > 1e-3 * dc);
        prop_assert_eq!(model.check_nonnegative(200.0).is_ok(), amp < dc);
    }
}

fn csv_outputs(report: &cyclic_intensity::experiments::ExperimentReport) -> Vec<(String, Vec<u8>)> {
    let dir = tempfile::tempdir().unwrap();
    let mut out: Vec<(String, Vec<u8>)> = report
        .write_to_dir(dir.path())
        .unwrap()
        .into_iter()
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect();
    out.sort();
    out
}

#[test]
fn experiment_outputs_are_reproducible() {
    let conv = ConvergenceConfig {
        horizons: vec![250.0, 500.0],
        rules: vec![GapRule::Constant(6.0)],
        replicates: 2,
        noise_replicates: 3,
        ..ConvergenceConfig::default()
    };
    let saw = SawtoothConfig { replicates: 2, noise_replicates: 3, horizon: 300.0, ..SawtoothConfig::default() };
    let dyn_cfg = DynRangeConfig {
        horizon: 600.0,
        ratios: vec![10.0],
        replicates: 2,
        noise_replicates: 3,
        ..DynRangeConfig::default()
    };
    let a = csv_outputs(&run_convergence(&conv).unwrap());
    let b = csv_outputs(&run_convergence(&conv).unwrap());
    assert_eq!(a.len(), 3);
    assert_eq!(a, b);
    assert_eq!(csv_outputs(&run_sawtooth(&saw).unwrap()), csv_outputs(&run_sawtooth(&saw).unwrap()));
    assert_eq!(csv_outputs(&run_dynrange(&dyn_cfg).unwrap()), csv_outputs(&run_dynrange(&dyn_cfg).unwrap()));

    let other = run_convergence(&ConvergenceConfig { seed: conv.seed + 1, ..conv.clone() }).unwrap();
    assert_ne!(csv_outputs(&other), a);
}
