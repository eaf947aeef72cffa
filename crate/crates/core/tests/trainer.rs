//! Trainer behaviour checked from the outside: recomputed constraint values,
//! dual updates and projection.

use fairboot::datasets::{gaussian_mixture_classification, inject, LabeledDataset, MixtureConfig, UncertaintyInjector};
use fairboot::metrics::chi2_independence;
use fairboot::nn::{Activation, Mlp, MlpSpec, OutputHead};
use fairboot::trainer::{train_model, DualSchedule, TrainMode, TrainReport, TrainerConfig};
use proptest::prelude::*;

fn data(seed: u64) -> LabeledDataset {
    let full = gaussian_mixture_classification(&MixtureConfig { n_rows: 400, ..MixtureConfig::default() }, seed).unwrap();
    inject(&full, UncertaintyInjector::KeepN { n: 60 }, seed + 1).unwrap()
}

fn cfg(mode: TrainMode, s: usize, epsilon: f64, seed: u64) -> TrainerConfig {
    TrainerConfig { s_subsamples: s, mode, epsilon, seed, epochs: 4, hidden_widths: vec![12], batch_size: 64, dual_lr: 0.5, ..TrainerConfig::classification() }
}

/// Rebuilds the trained network and evaluates the `D^(u)` constraint on it.
fn recompute_observed(report: &TrainReport, data: &LabeledDataset, c: &TrainerConfig) -> f64 {
    let mut widths = vec![data.n_features];
    widths.extend(&c.hidden_widths);
    widths.push(2);
    let mut m = Mlp::new(MlpSpec { layer_widths: widths, hidden_activation: Activation::Selu, output_head: OutputHead::Softmax2, seed: 0 }).unwrap();
    m.set_params(report.final_params.clone()).unwrap();
    let rows = data.present_indices();
    let x: Vec<f64> = rows.iter().flat_map(|&i| data.row(i).to_vec()).collect();
    let pred = m.predict(&x, rows.len()).unwrap();
    let sens: Vec<f64> = rows.iter().map(|&i| data.sensitive[i].unwrap()).collect();
    chi2_independence(&pred, &sens, &c.histogram).unwrap().value
}

#[test]
fn last_epoch_constraint_value_matches_an_independent_recount() {
    let d = data(3);
    let c = cfg(TrainMode::BootstrapS, 3, 0.01, 11);
    let (_, report) = train_model(&d, &c).unwrap();
    let last = report.epochs.last().unwrap();
    assert!((last.fairness[0] - recompute_observed(&report, &d, &c)).abs() < 1e-12);
}

#[test]
fn per_epoch_duals_follow_projected_ascent() {
    let d = data(5);
    for eps in [0.001, 0.05, 0.5] {
        let c = cfg(TrainMode::BootstrapS, 3, eps, 17);
        let (_, report) = train_model(&d, &c).unwrap();
        for w in report.epochs.windows(2) {
            for j in 0..w[1].duals.len() {
                let expect = (w[0].duals[j] + c.dual_lr * (w[1].fairness[j] - eps)).max(0.0);
                assert!((w[1].duals[j] - expect).abs() < 1e-12, "epoch {} dual {j}", w[1].epoch);
            }
        }
    }
}

#[test]
fn baseline_penalty_is_dominated_at_initialization() {
    let d = data(7);
    let (_, boot) = train_model(&d, &cfg(TrainMode::BootstrapS, 4, 0.05, 23)).unwrap();
    let (_, base) = train_model(&d, &cfg(TrainMode::Baseline, 4, 0.05, 23)).unwrap();
    let (b0, a0) = (&boot.epochs[0], &base.epochs[0]);
    assert_eq!(b0.fairness, a0.fairness);
    assert!(a0.penalty <= b0.penalty);
    assert!(base.epochs.iter().all(|e| e.duals[1..].iter().all(|&l| l == 0.0)));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn duals_stay_nonnegative(
        seed in 0u64..1000,
        eps in 0.0001..1.0f64,
        s in 0usize..4,
        per_step in any::<bool>(),
        dual_lr in 0.01..5.0f64,
    ) {
        let mut c = cfg(TrainMode::BootstrapS, s, eps, seed);
        c.dual_lr = dual_lr;
        c.epochs = 2;
        c.dual_schedule = if per_step { DualSchedule::PerStep } else { DualSchedule::PerEpoch };
        let (_, report) = train_model(&data(seed), &c).unwrap();
        prop_assert_eq!(report.dual_trajectory.len(), c.epochs + 1);
        prop_assert!(report.dual_trajectory.iter().flatten().all(|&l| l >= 0.0));
    }
}
