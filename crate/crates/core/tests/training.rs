mod common;

use common::{probabilities, random_circuit};
use iqp_core::controller::{ControlObjective, InitSpread, ObjectiveKind};
use iqp_core::datasets::BitstringDataset;
use iqp_core::evaluator::{full_distribution, BornDistribution};
use iqp_core::mmd::{bias_loss, exact_mmd2, population_variance, BatchSizes, KernelConfig, LossReport, ModeAssignment};
use iqp_core::rng::seeded;
use iqp_core::trainer::{
    train, train_base, train_bias_mitigated, train_conditional, EstimatorKind, TrainConfig, VarianceGradientKind,
};
use iqp_core::{combine_direct, Error, Init};

fn target_data(n: usize, shots: usize, seed: u64) -> BitstringDataset {
    let mut rng = seeded(seed);
    let c = random_circuit(n, 2 * n, 2, &mut rng);
    let d = BornDistribution::new(n, probabilities(&c)).unwrap();
    BitstringDataset::new(n, d.sample(shots, &mut rng)).unwrap()
}

fn exact_loss(c: &iqp_core::IqpCircuit, data: &BitstringDataset) -> f64 {
    let k = KernelConfig::for_qubits(data.n());
    exact_mmd2(&full_distribution(c).unwrap(), &data.histogram().unwrap(), &k).unwrap().0
}

#[test]
fn exact_training_reduces_mmd() {
    let data = target_data(6, 4000, 41);
    let cfg = TrainConfig { estimator: EstimatorKind::Exact, max_iters: 400, learning_rate: 0.05, seed: 2, ..Default::default() };
    let (c, h) = train_base(&data, 3, Init::Normal { mean: 0.0, std: 0.1 }, &cfg).unwrap();
    assert!(exact_loss(&c, &data) < 0.2 * h.records[0].loss, "{} vs {}", exact_loss(&c, &data), h.records[0].loss);
}

#[test]
fn monte_carlo_training_reduces_mmd() {
    let data = target_data(6, 4000, 42);
    let cfg = TrainConfig { max_iters: 300, learning_rate: 0.05, mc_samples: 500, subsets: 32, seed: 3, ..Default::default() };
    let (c, _) = train_base(&data, 3, Init::Normal { mean: 0.0, std: 0.1 }, &cfg).unwrap();
    let init = {
        let mut rng = iqp_core::rng::stream(3, 1 << 40);
        iqp_core::build_full_order_circuit(6, 3, Init::Normal { mean: 0.0, std: 0.1 }, &mut rng).unwrap()
    };
    assert!(exact_loss(&c, &data) < 0.5 * exact_loss(&init, &data));
}

#[test]
fn training_is_deterministic_under_a_seed() {
    let data = target_data(5, 1000, 43);
    let cfg = TrainConfig { max_iters: 40, mc_samples: 300, subsets: 16, seed: 9, ..Default::default() };
    let a = train_base(&data, 2, Init::Normal { mean: 0.0, std: 0.1 }, &cfg).unwrap();
    let b = train_base(&data, 2, Init::Normal { mean: 0.0, std: 0.1 }, &cfg).unwrap();
    assert_eq!(a.0, b.0);
    assert_eq!(a.1.to_csv(false), b.1.to_csv(false));
    let c = train_base(&data, 2, Init::Normal { mean: 0.0, std: 0.1 }, &TrainConfig { seed: 10, ..cfg }).unwrap();
    assert_ne!(a.0, c.0);
}

#[test]
fn frozen_parameters_never_move() {
    let quad = |t: &[f64], _: usize| -> iqp_core::Result<LossReport> {
        let v: f64 = t.iter().map(|x| (x - 1.0).powi(2)).sum();
        Ok(LossReport { value: v, gradient: t.iter().map(|x| 2.0 * (x - 1.0)).collect(), mmd_term: v, variance_term: None, stderr: None })
    };
    let c = random_circuit(4, 6, 2, &mut seeded(44));
    let mask = [true, false, true, false, false, true];
    let (out, _) = train(&c, &quad, &mask, &TrainConfig { max_iters: 50, ..Default::default() }).unwrap();
    for k in 0..6 {
        assert_eq!(out.theta()[k] == c.theta()[k], !mask[k]);
    }
    let (same, h) = train(&c, &quad, &[false; 6], &TrainConfig { max_iters: 50, ..Default::default() }).unwrap();
    assert_eq!(same, c);
    assert!(!h.records.is_empty());
}

#[test]
fn non_finite_loss_is_reported_with_parameters() {
    let bad = |t: &[f64], step: usize| -> iqp_core::Result<LossReport> {
        let v = if step == 3 { f64::NAN } else { 1.0 };
        Ok(LossReport { value: v, gradient: vec![0.1; t.len()], mmd_term: v, variance_term: None, stderr: None })
    };
    let c = random_circuit(3, 3, 2, &mut seeded(45));
    match train(&c, &bad, &[true; 3], &TrainConfig::default()) {
        Err(Error::NonFinite { iter, params, .. }) => {
            assert_eq!(iter, 3);
            assert_eq!(params.len(), 3);
        }
        other => panic!("expected NonFinite, got {other:?}"),
    }
}

#[test]
fn controller_training_leaves_base_untouched() {
    let n = 6;
    let data = target_data(n, 3000, 46);
    let cfg = TrainConfig { estimator: EstimatorKind::Exact, max_iters: 60, seed: 4, ..Default::default() };
    let (base, _) = train_base(&data, 2, Init::Normal { mean: 0.0, std: 0.2 }, &cfg).unwrap();
    let before = base.clone();
    let obj = ControlObjective::new(ObjectiveKind::LowWeight);
    let (bundle, hist) = train_conditional(&base, obj, &data, InitSpread::default(), &cfg).unwrap();
    assert_eq!(base, before);
    assert_eq!(bundle.circuit.len(), 3 * n - 3);
    let combined = combine_direct(&base, &bundle.circuit).unwrap();
    for (g, t) in combined.gates() {
        let b = base.position(g).map_or(0.0, |i| base.theta()[i]);
        let p = bundle.circuit.position(g).map_or(0.0, |i| bundle.phi()[i]);
        assert_eq!(t, b + p);
    }
    assert!(hist.records.last().unwrap().loss <= hist.records[0].loss);
}

#[test]
fn bias_loss_is_monotone_in_lambda() {
    let n = 6;
    let data = target_data(n, 2000, 47);
    let c = random_circuit(n, 10, 2, &mut seeded(48));
    let patterns = [0b000011, 0b001100, 0b110000];
    let k = KernelConfig::for_qubits(n);
    let sizes = BatchSizes { subsets: 16, mc_samples: 200 };
    let at = |l: f64| bias_loss(&c, &data, &patterns, l, &k, sizes, 0.01, &mut seeded(7)).unwrap().value;
    let vals: Vec<f64> = [0.0, 0.5, 1.0, 4.0].iter().map(|&l| at(l)).collect();
    assert!(vals.windows(2).all(|w| w[0] <= w[1]), "{vals:?}");
    assert!(bias_loss(&c, &data, &patterns, -1.0, &k, sizes, 0.01, &mut seeded(7)).is_err());
}

#[test]
fn bias_mitigation_flattens_mode_probabilities() {
    let n = 6;
    let patterns = [0b000011u64, 0b001100, 0b110000];
    let samples: Vec<u64> = (0..3000).map(|i| patterns[if i % 5 < 3 { 0 } else { 1 + i % 2 }]).collect();
    let data = BitstringDataset::new(n, samples).unwrap();
    let cfg = TrainConfig {
        estimator: EstimatorKind::Exact,
        variance_gradient: VarianceGradientKind::Exact,
        lambda: 5.0,
        max_iters: 300,
        learning_rate: 0.02,
        seed: 5,
        ..Default::default()
    };
    let (base, _) = train_base(&data, 3, Init::Normal { mean: 0.0, std: 0.1 }, &TrainConfig { lambda: 0.0, ..cfg.clone() }).unwrap();
    let modes = ModeAssignment::new(n, &patterns).unwrap();
    let var = |c: &iqp_core::IqpCircuit| population_variance(&modes.probabilities(&full_distribution(c).unwrap()));
    let (mitigated, _) = train_bias_mitigated(&base, &data, &patterns, InitSpread::default(), &cfg).unwrap();
    assert!(var(&mitigated) < 0.5 * var(&base), "{} vs {}", var(&mitigated), var(&base));
}
