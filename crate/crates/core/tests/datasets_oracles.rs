use iqp_core::analysis::{hw_histogram, BiasReport};
use iqp_core::datasets::{
    blob_dataset, blob_patterns, ising_gibbs_sample, nearest_pattern, BitstringDataset, IsingConfig,
};
use iqp_core::rng::seeded;
use rand::Rng;

/// Energy of a periodic `L×L` configuration with `J = 1`, counting each
/// neighbour slot of each site once and halving.
fn energy(x: u64, l: usize) -> f64 {
    let s = |i: usize| if x >> i & 1 == 1 { -1.0 } else { 1.0 };
    let mut e = 0.0;
    for r in 0..l {
        for c in 0..l {
            let i = r * l + c;
            let nb = [((r + l - 1) % l) * l + c, ((r + 1) % l) * l + c, r * l + (c + l - 1) % l, r * l + (c + 1) % l];
            e -= 0.5 * s(i) * nb.iter().map(|&j| s(j)).sum::<f64>();
        }
    }
    e
}

#[test]
fn ising_energy_histogram_matches_boltzmann_enumeration() {
    let (l, t) = (3, 2.5);
    let n = l * l;
    let weights: Vec<f64> = (0..1u64 << n).map(|x| (-energy(x, l) / t).exp()).collect();
    let z: f64 = weights.iter().sum();
    let mut exact = std::collections::BTreeMap::<i64, f64>::new();
    for (x, w) in weights.iter().enumerate() {
        *exact.entry(energy(x as u64, l) as i64).or_default() += w / z;
    }
    let cfg = IsingConfig { side: l, temperature: t, burn_in_sweeps: 500, thinning: 5 };
    let shots = 40_000;
    let data = ising_gibbs_sample(&cfg, shots, &mut seeded(31)).unwrap();
    let mut seen = std::collections::BTreeMap::<i64, f64>::new();
    for &x in data.samples() {
        *seen.entry(energy(x, l) as i64).or_default() += 1.0 / shots as f64;
    }
    for (e, p) in &exact {
        let q = seen.get(e).copied().unwrap_or(0.0);
        // thinned chains are mildly correlated; allow a generous 6σ band
        let sd = (p * (1.0 - p) / shots as f64).sqrt();
        assert!((p - q).abs() <= 6.0 * sd + 2e-3, "E={e}: exact {p}, sampled {q}");
    }
}

#[test]
fn infinite_temperature_is_uniform() {
    let cfg = IsingConfig { side: 4, temperature: f64::INFINITY, burn_in_sweeps: 10, thinning: 1 };
    let data = ising_gibbs_sample(&cfg, 20_000, &mut seeded(32)).unwrap();
    let m: f64 = data.samples().iter().map(|x| 16.0 - 2.0 * x.count_ones() as f64).sum::<f64>() / 20_000.0 / 16.0;
    assert!(m.abs() < 0.02, "mean magnetisation {m}");
    let h = hw_histogram(data.samples(), 16).unwrap();
    assert!((h.mass_in_range(0, 5) - 0.1051).abs() < 0.01, "{}", h.mass_in_range(0, 5));
}

#[test]
fn low_temperature_is_bimodal() {
    let data = ising_gibbs_sample(&IsingConfig { burn_in_sweeps: 2000, ..Default::default() }, 4000, &mut seeded(33)).unwrap();
    let h = hw_histogram(data.samples(), 16).unwrap();
    let middle = h.mass_in_range(6, 10);
    assert!(h.mass_in_range(0, 2) > 0.3 && h.mass_in_range(14, 16) > 0.3 && middle < 0.1, "{:?}", h.counts);
}

#[test]
fn ising_rejects_bad_configs() {
    let mut rng = seeded(1);
    for cfg in [
        IsingConfig { side: 1, ..Default::default() },
        IsingConfig { side: 9, ..Default::default() },
        IsingConfig { temperature: 0.0, ..Default::default() },
        IsingConfig { temperature: f64::NAN, ..Default::default() },
        IsingConfig { thinning: 0, ..Default::default() },
    ] {
        assert!(ising_gibbs_sample(&cfg, 5, &mut rng).is_err());
    }
    assert!(ising_gibbs_sample(&IsingConfig::default(), 0, &mut rng).is_err());
}

#[test]
fn noisy_blobs_decode_to_their_source() {
    let patterns = blob_patterns();
    let mut rng = seeded(34);
    let trials = 20_000;
    let mut hits = 0;
    for _ in 0..trials {
        let k = rng.random_range(0..8);
        let mut x = patterns[k];
        for i in 0..16 {
            if rng.random::<f64>() < 0.05 {
                x ^= 1 << i;
            }
        }
        hits += (nearest_pattern(x, &patterns) == k) as usize;
    }
    assert!(hits as f64 / trials as f64 >= 0.95);

    let data = blob_dataset(0.05, 16_000, &mut rng).unwrap();
    let report = BiasReport::from_samples(data.samples(), &patterns).unwrap();
    for f in &report.frequencies {
        assert!((f - 0.125).abs() < 0.015, "{f}");
    }
}

#[test]
fn clean_blobs_have_weight_four() {
    let data = blob_dataset(0.0, 500, &mut seeded(35)).unwrap();
    assert!(data.samples().iter().all(|x| x.count_ones() == 4 && blob_patterns().contains(x)));
    assert!(blob_dataset(0.5, 10, &mut seeded(1)).is_err());
}

#[test]
fn dataset_text_round_trip() {
    let data = blob_dataset(0.1, 300, &mut seeded(36)).unwrap();
    let back = BitstringDataset::from_text(&data.to_text()).unwrap();
    assert_eq!(back.samples(), data.samples());
    assert_eq!(back.n(), 16);
}

#[test]
fn uniform_weights_follow_binomial_tail() {
    let mut rng = seeded(37);
    let samples: Vec<u64> = (0..100_000).map(|_| rng.random::<u64>() & 0xffff).collect();
    let h = hw_histogram(&samples, 16).unwrap();
    let exact: f64 = (0..=5u64).map(|k| iqp_core::bits::binomial(16, k as usize) as f64).sum::<f64>() / 65536.0;
    assert!((exact - 0.1051).abs() < 1e-4);
    assert!((h.mass_in_range(0, 5) - exact).abs() < 0.003);
    assert_eq!(hw_histogram(&vec![0u64; 100], 16).unwrap().mass_in_range(0, 5), 1.0);
}

#[test]
fn two_pattern_bias_report_by_hand() {
    let r = BiasReport::from_frequencies(vec![0.75, 0.25]).unwrap();
    assert_eq!(r.std, 0.25);
    assert_eq!(r.max_min_ratio, 3.0);
    assert_eq!(r.total_deviation, 0.5);
    let u = BiasReport::from_frequencies(vec![0.125; 8]).unwrap();
    assert_eq!((u.std, u.max_min_ratio, u.total_deviation), (0.0, 1.0, 0.0));
}
