//! Independent reference implementations used only by tests.
#![allow(dead_code)]

use iqp_core::{Generator, IqpCircuit};
use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::Rng;

/// Applies each `exp(iθ X_g)` to `|0^n⟩` gate by gate:
/// `exp(iθ X_g)|x⟩ = cos θ |x⟩ + i sin θ |x ⊕ g⟩`.
pub fn statevector(c: &IqpCircuit) -> Vec<Complex64> {
    let dim = 1usize << c.n_qubits();
    let mut psi = vec![Complex64::new(0.0, 0.0); dim];
    psi[0] = Complex64::new(1.0, 0.0);
    for (g, t) in c.gates() {
        let m = g.mask() as usize;
        let (cs, sn) = (t.cos(), t.sin());
        psi = (0..dim).map(|x| psi[x] * cs + Complex64::new(0.0, sn) * psi[x ^ m]).collect();
    }
    psi
}

pub fn probabilities(c: &IqpCircuit) -> Vec<f64> {
    statevector(c).iter().map(|a| a.norm_sqr()).collect()
}

pub fn oracle_expval(c: &IqpCircuit, support: u64) -> f64 {
    probabilities(c)
        .iter()
        .enumerate()
        .map(|(x, p)| if (x as u64 & support).count_ones() % 2 == 0 { *p } else { -*p })
        .sum()
}

/// `Σ_{x,y} (p−q)(x) (p−q)(y) exp(−d_H(x,y)/(2σ²))` by double loop.
pub fn pairwise_mmd2(p: &[f64], q: &[f64], sigma: f64) -> f64 {
    let mut total = 0.0;
    for x in 0..p.len() {
        for y in 0..p.len() {
            let d = ((x ^ y) as u64).count_ones() as f64;
            total += (p[x] - q[x]) * (p[y] - q[y]) * (-d / (2.0 * sigma * sigma)).exp();
        }
    }
    total
}

/// Distinct random generators of order `1..=max_order` with parameters in (−1, 1).
/// `m` is capped at the number of available generators.
pub fn random_circuit<R: Rng>(n: usize, m: usize, max_order: usize, rng: &mut R) -> IqpCircuit {
    let available: u128 = (1..=max_order.min(n)).map(|k| iqp_core::bits::binomial(n, k)).sum();
    let m = m.min(available as usize);
    let mut gens: Vec<Generator> = Vec::new();
    while gens.len() < m {
        let k = rng.random_range(1..=max_order.min(n));
        let mut qs: Vec<usize> = (0..n).collect();
        qs.shuffle(rng);
        let mut qs = qs[..k].to_vec();
        qs.sort();
        let g = Generator::new(&qs).unwrap();
        if !gens.contains(&g) {
            gens.push(g);
        }
    }
    let theta = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
    IqpCircuit::new(n, gens, theta).unwrap()
}

pub fn random_support<R: Rng>(n: usize, rng: &mut R) -> u64 {
    loop {
        let s = rng.random::<u64>() & ((1u64 << n) - 1);
        if s != 0 {
            return s;
        }
    }
}

/// Largest `|⟨a|b⟩|`-based infidelity `1 − |⟨a|b⟩|²`.
pub fn infidelity(a: &[Complex64], b: &[Complex64]) -> f64 {
    let overlap: Complex64 = a.iter().zip(b).map(|(x, y)| x.conj() * y).sum();
    1.0 - overlap.norm_sqr()
}
