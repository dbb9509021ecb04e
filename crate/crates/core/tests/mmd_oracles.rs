mod common;

use common::{pairwise_mmd2, probabilities, random_circuit};
use iqp_core::datasets::BitstringDataset;
use iqp_core::evaluator::{full_distribution, BornDistribution};
use iqp_core::mmd::{exact_mmd2, exact_mmd_loss, mmd_loss_with, ExpvalSource, KernelConfig};
use iqp_core::rng::seeded;
use rand::Rng;

fn dataset_from<R: Rng>(n: usize, probs: &[f64], count: usize, rng: &mut R) -> BitstringDataset {
    let d = BornDistribution::new(n, probs.to_vec()).unwrap();
    BitstringDataset::new(n, d.sample(count, rng)).unwrap()
}

#[test]
fn exact_mmd_matches_pairwise_kernel_sum() {
    let mut rng = seeded(21);
    for n in 1..=8 {
        let c = random_circuit(n, 10, 3, &mut rng);
        let k = KernelConfig::for_qubits(n);
        let q: Vec<f64> = {
            let raw: Vec<f64> = (0..1 << n).map(|_| rng.random::<f64>()).collect();
            let s: f64 = raw.iter().sum();
            raw.iter().map(|v| v / s).collect()
        };
        let (value, _) = exact_mmd2(&full_distribution(&c).unwrap(), &q, &k).unwrap();
        let want = pairwise_mmd2(&probabilities(&c), &q, k.sigma);
        assert!((value - want).abs() < 1e-12, "n={n}: {value} vs {want}");
    }
}

#[test]
fn exact_mmd_gradient_matches_finite_differences() {
    let mut rng = seeded(22);
    let n = 5;
    let c = random_circuit(n, 12, 3, &mut rng);
    let k = KernelConfig::new(1.3).unwrap();
    let q = vec![1.0 / 32.0; 32];
    let report = exact_mmd_loss(&c, &q, &k).unwrap();
    for j in 0..c.len() {
        let h = 1e-5;
        let at = |d: f64| {
            let mut t = c.theta().to_vec();
            t[j] += d;
            pairwise_mmd2(&probabilities(&c.with_theta(t).unwrap()), &q, k.sigma)
        };
        let fd = (at(h) - at(-h)) / (2.0 * h);
        assert!((report.gradient[j] - fd).abs() < 1e-8);
    }
}

/// Averages many subset-sampled estimates and checks the mean is within
/// 3 standard errors of the pairwise-kernel value.
fn assert_subset_estimate_converges(source: ExpvalSource, seed: u64) {
    let mut rng = seeded(seed);
    for n in [3, 5, 8] {
        let c = random_circuit(n, 14, 3, &mut rng);
        let target = random_circuit(n, 14, 3, &mut rng);
        let data = dataset_from(n, &probabilities(&target), 3000, &mut rng);
        let hist = data.histogram().unwrap();
        let k = KernelConfig::for_qubits(n);
        let want = pairwise_mmd2(&probabilities(&c), &hist, k.sigma);
        let reps = 400;
        let vals: Vec<f64> =
            (0..reps).map(|_| mmd_loss_with(&c, &data, &k, 32, source, &mut rng).unwrap().value).collect();
        let mean = vals.iter().sum::<f64>() / reps as f64;
        let se = (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (reps as f64 - 1.0) / reps as f64).sqrt();
        assert!((mean - want).abs() <= 3.0 * se + 1e-12, "n={n}: {mean} ± {se} vs {want}");
    }
}

#[test]
fn subset_sampled_mmd_with_exact_expectations_is_unbiased() {
    assert_subset_estimate_converges(ExpvalSource::Exact, 23);
}

#[test]
fn subset_sampled_mmd_with_monte_carlo_is_unbiased() {
    assert_subset_estimate_converges(ExpvalSource::MonteCarlo { samples: 500 }, 24);
}

#[test]
fn distribution_against_itself_is_near_zero() {
    let mut rng = seeded(25);
    let n = 6;
    let c = random_circuit(n, 15, 3, &mut rng);
    let k = KernelConfig::for_qubits(n);
    let (exact, _) = exact_mmd2(&full_distribution(&c).unwrap(), &probabilities(&c), &k).unwrap();
    assert!(exact.abs() < 1e-15);

    let data = dataset_from(n, &probabilities(&c), 20_000, &mut rng);
    let r = mmd_loss_with(&c, &data, &k, 64, ExpvalSource::MonteCarlo { samples: 4000 }, &mut rng).unwrap();
    assert!(r.value.abs() <= 3.0 * r.stderr.unwrap() + 1e-3, "{} ± {:?}", r.value, r.stderr);
}

#[test]
fn kernel_mmd_is_a_metric_on_toy_distributions() {
    let k = KernelConfig::new(1.0).unwrap();
    let p = BornDistribution::new(2, vec![1.0, 0.0, 0.0, 0.0]).unwrap();
    let (same, _) = exact_mmd2(&p, &[1.0, 0.0, 0.0, 0.0], &k).unwrap();
    let (far, _) = exact_mmd2(&p, &[0.0, 0.0, 0.0, 1.0], &k).unwrap();
    let (near, _) = exact_mmd2(&p, &[0.0, 1.0, 0.0, 0.0], &k).unwrap();
    assert_eq!(same, 0.0);
    assert!(far > near && near > 0.0);
    let e = (-1.0f64 / 2.0).exp();
    assert!((near - (2.0 - 2.0 * e)).abs() < 1e-12);
    assert!((far - (2.0 - 2.0 * e * e)).abs() < 1e-12);
}
