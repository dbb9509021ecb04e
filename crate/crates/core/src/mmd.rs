//! Maximum mean discrepancy between a circuit's output and a dataset.
//!
//! The kernel is Gaussian in Hamming distance, `k(x, y) = q^{d_H(x, y)}` with
//! `q = exp(-1/(2σ²))`. Per bit, `q^{[x_i ≠ y_i]} = a + b z_i(x) z_i(y)` with
//! `a = (1+q)/2`, `b = (1-q)/2`, so the product kernel expands into Pauli-Z
//! parities: `k(x, y) = Σ_S a^{n-|S|} b^{|S|} z_S(x) z_S(y)`. The weights form
//! the distribution of a random subset that includes each qubit with
//! probability `b`, hence
//!
//! ```text
//! MMD² = E_S[ (⟨Z_S⟩_model − ⟨Z_S⟩_data)² ].
//! ```
//!
//! Empty subsets contribute zero. They are redrawn and the average rescaled by
//! `1 − a^n`, the probability of a nonempty draw, which keeps the estimator
//! unbiased.

use rand::Rng;
use rand_distr::{Bernoulli, Distribution};

use crate::bits::full_mask;
use crate::circuit::IqpCircuit;
use crate::datasets::{nearest_pattern, BitstringDataset};
use crate::error::invalid;
use crate::evaluator::{mc_batch, BornDistribution, ExactState, Observable};
use crate::{Error, Result};

pub const BIAS_MAX_QUBITS: usize = 20;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KernelConfig {
    /// Bandwidth σ of the Gaussian kernel over Hamming distance.
    pub sigma: f64,
}

impl KernelConfig {
    pub fn new(sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return invalid(format!("kernel bandwidth must be positive and finite, got {sigma}"));
        }
        let k = KernelConfig { sigma };
        let b = k.inclusion_prob();
        if !(b > 0.0 && b < 0.5) {
            return invalid(format!("bandwidth {sigma} gives a degenerate inclusion probability {b}"));
        }
        Ok(k)
    }

    /// Default bandwidth `σ² = n/8`.
    pub fn for_qubits(n: usize) -> Self {
        KernelConfig { sigma: (n as f64 / 8.0).sqrt() }
    }

    /// Per-bit kernel value for a mismatch, `exp(-1/(2σ²))`.
    pub fn decay(&self) -> f64 {
        (-1.0 / (2.0 * self.sigma * self.sigma)).exp()
    }

    /// Probability `b` that a qubit enters a sampled subset.
    pub fn inclusion_prob(&self) -> f64 {
        (1.0 - self.decay()) / 2.0
    }

    /// Probability of drawing a nonempty subset on `n` qubits.
    pub fn nonempty_prob(&self, n: usize) -> f64 {
        1.0 - (1.0 - self.inclusion_prob()).powi(n as i32)
    }

    pub fn kernel(&self, x: u64, y: u64) -> f64 {
        self.decay().powi((x ^ y).count_ones() as i32)
    }

    /// `K v` for the product kernel on `2^n` strings, in `O(n 2^n)`.
    pub fn apply(&self, v: &mut [f64]) {
        let q = self.decay();
        let mut bit = 1;
        while bit < v.len() {
            for x in 0..v.len() {
                if x & bit == 0 {
                    let (a, b) = (v[x], v[x | bit]);
                    v[x] = a + q * b;
                    v[x | bit] = b + q * a;
                }
            }
            bit <<= 1;
        }
    }
}

/// Observable supports drawn i.i.d. with per-qubit inclusion probability `b`;
/// empty draws are rejected.
#[derive(Clone, Debug, PartialEq)]
pub struct SubsetBatch {
    pub supports: Vec<Observable>,
}

impl SubsetBatch {
    pub fn draw<R: Rng + ?Sized>(n: usize, kernel: &KernelConfig, size: usize, rng: &mut R) -> Result<Self> {
        if size == 0 {
            return invalid("subset batch size must be positive");
        }
        let coin = Bernoulli::new(kernel.inclusion_prob()).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        let supports = (0..size)
            .map(|_| loop {
                let mask = (0..n).fold(0u64, |m, i| if coin.sample(rng) { m | 1 << i } else { m });
                if mask != 0 {
                    break Observable::from_mask(mask);
                }
            })
            .collect();
        Ok(SubsetBatch { supports })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LossReport {
    pub value: f64,
    pub gradient: Vec<f64>,
    pub mmd_term: f64,
    pub variance_term: Option<f64>,
    /// Standard error of `value` when it is a stochastic estimate.
    pub stderr: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BatchSizes {
    pub subsets: usize,
    pub mc_samples: usize,
}

impl Default for BatchSizes {
    fn default() -> Self {
        BatchSizes { subsets: 64, mc_samples: 2000 }
    }
}

/// How model-side `⟨Z_S⟩` values are obtained for a subset batch.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExpvalSource {
    MonteCarlo { samples: usize },
    Exact,
}

/// Mean of `(-1)^{|x ∧ S|}` over the dataset.
pub fn empirical_expval(data: &BitstringDataset, s: Observable) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::EmptyDataset(String::new()));
    }
    Ok(data.samples().iter().map(|&x| s.eval(x)).sum::<f64>() / data.len() as f64)
}

fn check_dims(c: &IqpCircuit, data: &BitstringDataset) -> Result<()> {
    if c.n_qubits() != data.n() {
        return invalid(format!("circuit has {} qubits but data has {} bits", c.n_qubits(), data.n()));
    }
    Ok(())
}

/// Stochastic MMD² with Monte-Carlo model expectations.
pub fn mmd_loss<R: Rng + ?Sized>(
    c: &IqpCircuit,
    data: &BitstringDataset,
    kernel: &KernelConfig,
    sizes: BatchSizes,
    rng: &mut R,
) -> Result<LossReport> {
    mmd_loss_with(c, data, kernel, sizes.subsets, ExpvalSource::MonteCarlo { samples: sizes.mc_samples }, rng)
}

/// Subset-sampled MMD² and its gradient.
///
/// With Monte-Carlo expectations each squared difference is debiased by the
/// estimator's variance, `(m̂ − d)² − se²`, so the value is unbiased but may
/// be slightly negative. The gradient follows the chain rule
/// `2 (m̂ − d) ∂m̂/∂θ` with both factors from the same samples.
pub fn mmd_loss_with<R: Rng + ?Sized>(
    c: &IqpCircuit,
    data: &BitstringDataset,
    kernel: &KernelConfig,
    subsets: usize,
    source: ExpvalSource,
    rng: &mut R,
) -> Result<LossReport> {
    check_dims(c, data)?;
    if data.is_empty() {
        return Err(Error::EmptyDataset(String::new()));
    }
    let n = c.n_qubits();
    let batch = SubsetBatch::draw(n, kernel, subsets, rng)?;
    let data_ev: Vec<f64> =
        batch.supports.iter().map(|&s| empirical_expval(data, s)).collect::<Result<_>>()?;
    let scale = kernel.nonempty_prob(n) / subsets as f64;
    let mut gradient = vec![0.0; c.len()];
    let terms: Vec<f64> = match source {
        ExpvalSource::MonteCarlo { samples } => {
            let est = mc_batch(c, &batch.supports, samples, true, rng)?;
            est.iter()
                .zip(&data_ev)
                .map(|(e, d)| {
                    let diff = e.expval.value - d;
                    for &(k, g) in &e.grad {
                        gradient[k] += scale * 2.0 * diff * g;
                    }
                    diff * diff - e.expval.stderr * e.expval.stderr
                })
                .collect()
        }
        ExpvalSource::Exact => {
            let state = ExactState::new(c)?;
            let dist = state.distribution();
            let mut dl_dp = vec![0.0; dist.probs().len()];
            let terms = batch
                .supports
                .iter()
                .zip(&data_ev)
                .map(|(&s, d)| {
                    let diff = dist.expval(s) - d;
                    for (x, r) in dl_dp.iter_mut().enumerate() {
                        *r += scale * 2.0 * diff * s.eval(x as u64);
                    }
                    diff * diff
                })
                .collect();
            gradient = state.pullback(c, &dl_dp);
            terms
        }
    };
    let b = terms.len() as f64;
    let mean = terms.iter().sum::<f64>() / b;
    let var = if terms.len() > 1 { terms.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (b - 1.0) } else { 0.0 };
    let value = kernel.nonempty_prob(n) * mean;
    Ok(LossReport {
        value,
        gradient,
        mmd_term: value,
        variance_term: None,
        stderr: Some(kernel.nonempty_prob(n) * (var / b).sqrt()),
    })
}

/// Exact `MMD² = (p − q)ᵀ K (p − q)` and `∂/∂p = 2 K (p − q)`.
pub fn exact_mmd2(model: &BornDistribution, data_hist: &[f64], kernel: &KernelConfig) -> Result<(f64, Vec<f64>)> {
    if data_hist.len() != model.probs().len() {
        return invalid("data histogram and model distribution differ in size");
    }
    let delta: Vec<f64> = model.probs().iter().zip(data_hist).map(|(p, q)| p - q).collect();
    let mut kd = delta.clone();
    kernel.apply(&mut kd);
    let value = delta.iter().zip(&kd).map(|(a, b)| a * b).sum::<f64>().max(0.0);
    kd.iter_mut().for_each(|v| *v *= 2.0);
    Ok((value, kd))
}

/// Exact MMD² of a circuit against a dataset histogram, with its exact gradient.
pub fn exact_mmd_loss(c: &IqpCircuit, data_hist: &[f64], kernel: &KernelConfig) -> Result<LossReport> {
    let state = ExactState::new(c)?;
    let (value, dl_dp) = exact_mmd2(&state.distribution(), data_hist, kernel)?;
    Ok(LossReport { value, gradient: state.pullback(c, &dl_dp), mmd_term: value, variance_term: None, stderr: None })
}

/// Nearest-pattern assignment of every string in `0..2^n`.
#[derive(Clone, Debug, PartialEq)]
pub struct ModeAssignment {
    n_modes: usize,
    assign: Vec<u8>,
}

impl ModeAssignment {
    pub fn new(n: usize, patterns: &[u64]) -> Result<Self> {
        if patterns.is_empty() {
            return invalid("need at least one pattern");
        }
        if patterns.len() > u8::MAX as usize {
            return invalid("at most 255 patterns are supported");
        }
        for (i, p) in patterns.iter().enumerate() {
            if p & !full_mask(n) != 0 {
                return invalid(format!("pattern {i} longer than {n} bits"));
            }
            if patterns[..i].contains(p) {
                return invalid(format!("pattern {i} duplicates an earlier pattern"));
            }
        }
        if n > crate::evaluator::EXACT_MAX_QUBITS {
            return Err(Error::Capacity { what: "mode assignment", n, max: crate::evaluator::EXACT_MAX_QUBITS });
        }
        let assign = (0..1u64 << n).map(|x| nearest_pattern(x, patterns) as u8).collect();
        Ok(ModeAssignment { n_modes: patterns.len(), assign })
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn mode_of(&self, x: u64) -> usize {
        self.assign[x as usize] as usize
    }

    pub fn probabilities(&self, dist: &BornDistribution) -> Vec<f64> {
        let mut out = vec![0.0; self.n_modes];
        for (&m, p) in self.assign.iter().zip(dist.probs()) {
            out[m as usize] += p;
        }
        out
    }
}

pub fn mode_probabilities(dist: &BornDistribution, patterns: &[u64]) -> Result<Vec<f64>> {
    Ok(ModeAssignment::new(dist.n_qubits(), patterns)?.probabilities(dist))
}

pub fn population_variance(v: &[f64]) -> f64 {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64
}

/// How the gradient of the mode-variance penalty is obtained.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum VarianceGradient {
    /// Simultaneous perturbation with step `delta`: two exact evaluations.
    Spsa { delta: f64 },
    /// Exact chain rule through the Born distribution.
    Exact,
}

/// `Var(p_modes)` for a circuit, with its gradient.
pub fn variance_penalty<R: Rng + ?Sized>(
    c: &IqpCircuit,
    modes: &ModeAssignment,
    grad: VarianceGradient,
    rng: &mut R,
) -> Result<(f64, Vec<f64>)> {
    if c.n_qubits() > BIAS_MAX_QUBITS {
        return Err(Error::Capacity { what: "bias loss", n: c.n_qubits(), max: BIAS_MAX_QUBITS });
    }
    let state = ExactState::new(c)?;
    let probs = modes.probabilities(&state.distribution());
    let value = population_variance(&probs);
    let gradient = match grad {
        VarianceGradient::Exact => {
            let m = probs.len() as f64;
            let mean = 1.0 / m;
            let per_mode: Vec<f64> = probs.iter().map(|p| 2.0 / m * (p - mean)).collect();
            let dl_dp: Vec<f64> = modes.assign.iter().map(|&k| per_mode[k as usize]).collect();
            state.pullback(c, &dl_dp)
        }
        VarianceGradient::Spsa { delta } => {
            if !(delta > 0.0) {
                return invalid(format!("SPSA step must be positive, got {delta}"));
            }
            let coin = Bernoulli::new(0.5).unwrap();
            let dirs: Vec<f64> = (0..c.len()).map(|_| if coin.sample(rng) { 1.0 } else { -1.0 }).collect();
            let shifted = |sgn: f64| -> Result<f64> {
                let theta = c.theta().iter().zip(&dirs).map(|(t, d)| t + sgn * delta * d).collect();
                let dist = ExactState::new(&c.with_theta(theta)?)?.distribution();
                Ok(population_variance(&modes.probabilities(&dist)))
            };
            let slope = (shifted(1.0)? - shifted(-1.0)?) / (2.0 * delta);
            dirs.iter().map(|d| slope * d).collect()
        }
    };
    Ok((value, gradient))
}

/// `mmd_loss + λ · Var(p_modes)` with Monte-Carlo MMD and an SPSA estimate of
/// the penalty gradient.
#[allow(clippy::too_many_arguments)]
pub fn bias_loss<R: Rng + ?Sized>(
    c: &IqpCircuit,
    data: &BitstringDataset,
    patterns: &[u64],
    lambda: f64,
    kernel: &KernelConfig,
    sizes: BatchSizes,
    spsa_delta: f64,
    rng: &mut R,
) -> Result<LossReport> {
    if c.n_qubits() > BIAS_MAX_QUBITS {
        return Err(Error::Capacity { what: "bias loss", n: c.n_qubits(), max: BIAS_MAX_QUBITS });
    }
    if !(lambda >= 0.0) {
        return invalid(format!("penalty weight must be nonnegative, got {lambda}"));
    }
    let mut report = mmd_loss(c, data, kernel, sizes, rng)?;
    if lambda == 0.0 {
        return Ok(report);
    }
    let modes = ModeAssignment::new(c.n_qubits(), patterns)?;
    let (var, vgrad) = variance_penalty(c, &modes, VarianceGradient::Spsa { delta: spsa_delta }, rng)?;
    report.value += lambda * var;
    report.variance_term = Some(var);
    for (g, v) in report.gradient.iter_mut().zip(vgrad) {
        *g += lambda * v;
    }
    Ok(report)
}
