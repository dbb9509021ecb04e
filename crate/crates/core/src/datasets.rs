//! Benchmark datasets: 2D Ising Gibbs samples and binary blobs.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bits::{self, format_bits, hamming_distance, parse_bits};
use crate::error::invalid;
use crate::{Error, Result};

pub use crate::bits::hamming_weight;

/// Where a dataset came from; written to the metadata sidecar.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub generator: String,
    pub params: BTreeMap<String, String>,
    pub seed: Option<u64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BitstringDataset {
    n: usize,
    samples: Vec<u64>,
    pub provenance: Provenance,
}

impl BitstringDataset {
    pub fn new(n: usize, samples: Vec<u64>) -> Result<Self> {
        if n == 0 || n > bits::MAX_QUBITS {
            return invalid(format!("bit length must be in 1..=64, got {n}"));
        }
        if samples.is_empty() {
            return Err(Error::EmptyDataset(String::new()));
        }
        if let Some(x) = samples.iter().find(|&&x| x & !bits::full_mask(n) != 0) {
            return invalid(format!("sample {x:#x} longer than {n} bits"));
        }
        Ok(BitstringDataset { n, samples, provenance: Provenance::default() })
    }

    pub fn with_provenance(mut self, provenance: Provenance) -> Self {
        self.provenance = provenance;
        self
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn samples(&self) -> &[u64] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Empirical distribution over all `2^n` strings.
    pub fn histogram(&self) -> Result<Vec<f64>> {
        if self.n > crate::evaluator::EXACT_MAX_QUBITS {
            return Err(Error::Capacity { what: "dataset histogram", n: self.n, max: crate::evaluator::EXACT_MAX_QUBITS });
        }
        let mut h = vec![0.0; 1 << self.n];
        let w = 1.0 / self.samples.len() as f64;
        for &x in &self.samples {
            h[x as usize] += w;
        }
        Ok(h)
    }

    /// Text form: header `bits <n> <count>`, then one string per line.
    pub fn to_text(&self) -> String {
        let mut out = format!("bits {} {}\n", self.n, self.samples.len());
        for &x in &self.samples {
            out.push_str(&format_bits(x, self.n));
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())).filter(|(_, l)| !l.is_empty());
        let (hl, header) = lines.next().ok_or(Error::Parse { line: 0, msg: "missing header".into() })?;
        let f: Vec<&str> = header.split_whitespace().collect();
        let perr = |line: usize, msg: String| Error::Parse { line, msg };
        if f.len() != 3 || f[0] != "bits" {
            return Err(perr(hl, format!("expected `bits <n> <count>`, got {header:?}")));
        }
        let n: usize = f[1].parse().map_err(|_| perr(hl, "bad bit length".into()))?;
        let count: usize = f[2].parse().map_err(|_| perr(hl, "bad count".into()))?;
        let mut samples = Vec::with_capacity(count);
        for (ln, line) in lines {
            if line.len() != n {
                return Err(perr(ln, format!("expected {n} bits, got {}", line.len())));
            }
            samples.push(parse_bits(line).map_err(|e| perr(ln, e.to_string()))?);
        }
        if samples.len() != count {
            return Err(perr(hl, format!("header announces {count} samples, found {}", samples.len())));
        }
        BitstringDataset::new(n, samples)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IsingConfig {
    /// Lattice side; `n = side²`.
    pub side: usize,
    /// In units of `J/k_B`. `f64::INFINITY` accepts every proposal.
    pub temperature: f64,
    pub burn_in_sweeps: usize,
    /// Sweeps between consecutive samples.
    pub thinning: usize,
}

impl Default for IsingConfig {
    fn default() -> Self {
        IsingConfig { side: 4, temperature: 2.0, burn_in_sweeps: 10_000, thinning: 10 }
    }
}

impl IsingConfig {
    fn validate(&self) -> Result<()> {
        if self.side < 2 || self.side * self.side > bits::MAX_QUBITS {
            return invalid(format!("lattice side must be in 2..=8, got {}", self.side));
        }
        if !(self.temperature > 0.0) {
            return invalid(format!("temperature must be positive, got {}", self.temperature));
        }
        if self.thinning == 0 {
            return invalid("thinning must be at least one sweep");
        }
        Ok(())
    }
}

/// Metropolis single-spin-flip sampling of the ferromagnetic (`J = 1`) Ising
/// model on a periodic `L×L` lattice. Spin `+1` is bit 0, `-1` is bit 1,
/// flattened row-major.
pub fn ising_gibbs_sample<R: Rng + ?Sized>(cfg: &IsingConfig, n_samples: usize, rng: &mut R) -> Result<BitstringDataset> {
    cfg.validate()?;
    if n_samples == 0 {
        return Err(Error::EmptyDataset(": requested zero samples".into()));
    }
    let l = cfg.side;
    let n = l * l;
    let beta = 1.0 / cfg.temperature;
    let neighbors: Vec<[usize; 4]> = (0..n)
        .map(|i| {
            let (r, c) = (i / l, i % l);
            [((r + l - 1) % l) * l + c, ((r + 1) % l) * l + c, r * l + (c + l - 1) % l, r * l + (c + 1) % l]
        })
        .collect();
    // ΔE = 2 s h with h ∈ {-4, ..., 4}; only positive ΔE needs a coin flip.
    let accept: Vec<f64> = (0..=8).map(|de| (-beta * de as f64).exp()).collect();

    let mut spins: Vec<i8> = (0..n).map(|_| if rng.random::<bool>() { 1 } else { -1 }).collect();
    let sweep = |spins: &mut Vec<i8>, rng: &mut R| {
        if beta == 0.0 {
            // β = 0: independent fair spins
            spins.iter_mut().for_each(|s| *s = if rng.random::<bool>() { 1 } else { -1 });
            return;
        }
        for _ in 0..n {
            let i = rng.random_range(0..n);
            let h: i32 = neighbors[i].iter().map(|&j| spins[j] as i32).sum();
            let de = 2 * spins[i] as i32 * h;
            if de <= 0 || rng.random::<f64>() < accept[de as usize] {
                spins[i] = -spins[i];
            }
        }
    };
    for _ in 0..cfg.burn_in_sweeps {
        sweep(&mut spins, rng);
    }
    let mut samples = Vec::with_capacity(n_samples);
    for _ in 0..n_samples {
        for _ in 0..cfg.thinning {
            sweep(&mut spins, rng);
        }
        samples.push(spins.iter().enumerate().fold(0u64, |x, (i, &s)| if s < 0 { x | 1 << i } else { x }));
    }
    let mut params = BTreeMap::new();
    params.insert("side".into(), l.to_string());
    params.insert("temperature".into(), cfg.temperature.to_string());
    params.insert("burn_in_sweeps".into(), cfg.burn_in_sweeps.to_string());
    params.insert("thinning".into(), cfg.thinning.to_string());
    Ok(BitstringDataset::new(n, samples)?.with_provenance(Provenance { generator: "ising".into(), params, seed: None }))
}

pub const BLOB_SIDE: usize = 4;
pub const BLOB_BITS: usize = BLOB_SIDE * BLOB_SIDE;

/// The eight blob patterns: solid 2×2 blocks on the 4×4 grid anchored at every
/// `(r, c) ∈ {0,1,2}²` except the center `(1, 1)`, in row-major anchor order.
pub fn blob_patterns() -> Vec<u64> {
    let mut out = Vec::with_capacity(8);
    for r in 0..3 {
        for c in 0..3 {
            if (r, c) == (1, 1) {
                continue;
            }
            let cells = [(r, c), (r, c + 1), (r + 1, c), (r + 1, c + 1)];
            out.push(cells.iter().fold(0u64, |m, &(rr, cc)| m | 1 << (rr * BLOB_SIDE + cc)));
        }
    }
    out
}

/// Uniform mixture over [`blob_patterns`], each bit flipped with probability
/// `noise_p`.
pub fn blob_dataset<R: Rng + ?Sized>(noise_p: f64, n_samples: usize, rng: &mut R) -> Result<BitstringDataset> {
    if !(0.0..0.5).contains(&noise_p) {
        return invalid(format!("noise probability must be in [0, 0.5), got {noise_p}"));
    }
    if n_samples == 0 {
        return Err(Error::EmptyDataset(": requested zero samples".into()));
    }
    let patterns = blob_patterns();
    let samples = (0..n_samples)
        .map(|_| {
            let mut x = patterns[rng.random_range(0..patterns.len())];
            for i in 0..BLOB_BITS {
                if rng.random::<f64>() < noise_p {
                    x ^= 1 << i;
                }
            }
            x
        })
        .collect();
    let mut params = BTreeMap::new();
    params.insert("noise_p".into(), noise_p.to_string());
    Ok(BitstringDataset::new(BLOB_BITS, samples)?.with_provenance(Provenance { generator: "blob".into(), params, seed: None }))
}

/// Index of the nearest pattern by Hamming distance; ties go to the lowest index.
pub fn nearest_pattern(x: u64, patterns: &[u64]) -> usize {
    let mut best = 0;
    let mut best_d = u32::MAX;
    for (i, &p) in patterns.iter().enumerate() {
        let d = hamming_distance(x, p);
        if d < best_d {
            best = i;
            best_d = d;
        }
    }
    best
}
