mod common;

use common::random_dataset;
use mttm_core::{
    completed_values, impute, impute_with_params, AscentWorkspace, CensoringBound, Dataset, FitConfig, TargetEntry,
    VariationalState,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn fully_observed_table_passes_through_bit_exactly() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let data = random_dataset(&mut rng, 3, 25, 2, 0.0);
    let out = impute(&data, &FitConfig::default()).unwrap();
    let input: Vec<f64> = data.entries().iter().map(|e| e.observed().unwrap()).collect();
    assert_eq!(
        out.completed.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
        input.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
    );
}

#[test]
fn posterior_mean_of_a_centred_left_window() {
    let u = 1.25;
    let data = Dataset::new(
        vec![vec![1.0]],
        vec![vec![TargetEntry::Censored(CensoringBound::below(u))]],
    )
    .unwrap();
    let mut q = VariationalState::initial(&data, 1.0).unwrap();
    q.set_truncated(0, 0, u, 1.0).unwrap();
    let done = completed_values(&data, &q);
    assert!((done[0] - (u - 0.797_884_560_8)).abs() < 1e-10);
}

#[test]
fn imputed_values_stay_inside_their_windows() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    for _ in 0..10 {
        let data = random_dataset(&mut rng, 3, 40, 2, 0.4);
        let out = impute(&data, &FitConfig::default()).unwrap();
        for (k, i) in data.hidden_indices() {
            let bound = data.entry(k, i).bound().unwrap();
            let v = out.value(k, i);
            assert!(bound.lower < v && v < bound.upper, "({k},{i}) {v} outside {bound:?}");
        }
        for (k, i) in data.visible_indices() {
            assert_eq!(out.value(k, i), data.entry(k, i).observed().unwrap());
        }
    }
}

#[test]
fn interval_window_brackets_the_imputation() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let data = random_dataset(&mut rng, 2, 30, 1, 0.0);
    let mut y = data.entries().to_vec();
    y[3] = TargetEntry::Censored(CensoringBound::interval(-0.3, 0.4).unwrap());
    let data = data.with_targets(y).unwrap();
    let out = impute(&data, &FitConfig::default()).unwrap();
    assert!(-0.3 < out.value(0, 3) && out.value(0, 3) < 0.4);
}

#[test]
fn extra_sweep_at_convergence_barely_moves_imputations() {
    let mut rng = ChaCha8Rng::seed_from_u64(24);
    let data = random_dataset(&mut rng, 3, 40, 2, 0.3);
    let config = FitConfig {
        rel_tol: 1e-10,
        max_sweeps: 5000,
        ..FitConfig::default()
    };
    let out = impute(&data, &config).unwrap();
    assert!(out.report.converged);
    let mut ws = AscentWorkspace::with_state(&data, config.clone(), out.params.clone(), out.q.clone()).unwrap();
    ws.q_sweep().unwrap();
    let again = completed_values(&data, ws.q());
    // The objective is flat to second order at the fixed point, so a stop on
    // relative objective change rel_tol leaves per-sweep movement of order
    // sqrt(rel_tol); compare on that scale.
    for (a, b) in again.iter().zip(&out.completed) {
        assert!(
            (a - b).abs() <= 10.0 * config.rel_tol.sqrt() * (1.0 + b.abs()),
            "{a} vs {b}"
        );
    }
}

#[test]
fn refitting_with_fixed_parameters_reproduces_the_imputation() {
    let mut rng = ChaCha8Rng::seed_from_u64(25);
    let data = random_dataset(&mut rng, 2, 30, 2, 0.3);
    let config = FitConfig {
        rel_tol: 1e-12,
        max_sweeps: 5000,
        ..FitConfig::default()
    };
    let out = impute(&data, &config).unwrap();
    let again = impute_with_params(&data, &out.params, &config).unwrap();
    for (a, b) in again.iter().zip(&out.completed) {
        assert!((a - b).abs() < 1e-6 * (1.0 + b.abs()), "{a} vs {b}");
    }
}
