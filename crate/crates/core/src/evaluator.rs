//! Expectation values, exact distributions and sampling for IQP circuits.
//!
//! Two routes are provided:
//!
//! * **Monte-Carlo.** With `A(S) = { j : |g_j ∩ S| odd }`,
//!   `⟨Z_S⟩ = E_w[ cos(2 Σ_{j∈A(S)} θ_j χ_j(w)) ]` over uniform `w ∈ {0,1}^n`,
//!   where `χ_j(w) = (-1)^{|g_j ∧ w|}`. Cost is linear in gates and samples,
//!   with no qubit cap.
//! * **Exact.** Amplitudes are `a = 2^{-n} WHT[e^{iφ}]` with
//!   `φ(w) = Σ_j θ_j χ_j(w)`. The phase vector is itself the WHT of the
//!   parameters scattered onto their generator masks, so the whole state costs
//!   `O(n 2^n + m)`. Limited to [`EXACT_MAX_QUBITS`].

use num_complex::Complex64;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rayon::prelude::*;

use crate::bits::{self, full_mask, sign};
use crate::circuit::IqpCircuit;
use crate::error::invalid;
use crate::rng;
use crate::wht::fwht;
use crate::{Error, Result};

pub const EXACT_MAX_QUBITS: usize = 26;
pub const INFLUENCE_MAX_QUBITS: usize = 20;

/// Samples per parallel work unit of the Monte-Carlo estimators.
const MC_CHUNK: usize = 256;
/// Chunks evaluated between ordered reductions.
const MC_WAVE: usize = 64;

/// Tensor product of Pauli-Z on a qubit subset. The empty support is the
/// identity.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Observable(u64);

impl Observable {
    pub fn from_mask(mask: u64) -> Self {
        Observable(mask)
    }

    pub fn new(qubits: &[usize]) -> Result<Self> {
        qubits.iter().try_fold(Observable(0), |acc, &q| {
            if q >= bits::MAX_QUBITS {
                invalid(format!("qubit index {q} out of range"))
            } else {
                Ok(Observable(acc.0 | 1 << q))
            }
        })
    }

    pub fn identity() -> Self {
        Observable(0)
    }

    pub fn mask(self) -> u64 {
        self.0
    }

    pub fn is_identity(self) -> bool {
        self.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    /// `(-1)^{|x ∧ S|}`.
    #[inline]
    pub fn eval(self, x: u64) -> f64 {
        sign(self.0, x)
    }

    fn check(self, n: usize) -> Result<()> {
        if self.0 & !full_mask(n) != 0 {
            invalid(format!("observable support {:#x} exceeds {n} qubits", self.0))
        } else {
            Ok(())
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
    pub n_samples: usize,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Estimate { value, stderr: 0.0, n_samples: 0 }
    }
}

/// Gradient of `⟨Z_S⟩` with respect to every circuit parameter.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientEstimate {
    pub values: Vec<f64>,
    pub stderr: Vec<f64>,
    pub n_samples: usize,
}

/// One observable's Monte-Carlo result from [`mc_batch`].
#[derive(Clone, Debug)]
pub struct BatchEstimate {
    pub expval: Estimate,
    /// `(parameter index, ∂⟨Z_S⟩/∂θ)` for parameters in `A(S)`; empty unless
    /// gradients were requested.
    pub grad: Vec<(usize, f64)>,
    pub grad_stderr: Vec<f64>,
}

/// Gates anticommuting with `Z_S`: `(mask, θ, index)` for odd overlaps.
fn active_set(c: &IqpCircuit, s: Observable) -> Vec<(u64, f64, usize)> {
    c.gates()
        .enumerate()
        .filter(|(_, (g, _))| bits::parity(g.mask() & s.mask()) == 1)
        .map(|(i, (g, t))| (g.mask(), t, i))
        .collect()
}

#[derive(Clone)]
struct Moments {
    sum: f64,
    sumsq: f64,
    gsum: Vec<f64>,
    gsumsq: Vec<f64>,
}

impl Moments {
    fn zero(n_grad: usize) -> Self {
        Moments { sum: 0.0, sumsq: 0.0, gsum: vec![0.0; n_grad], gsumsq: vec![0.0; n_grad] }
    }

    fn absorb(&mut self, other: &Moments) {
        self.sum += other.sum;
        self.sumsq += other.sumsq;
        for (a, b) in self.gsum.iter_mut().zip(&other.gsum) {
            *a += b;
        }
        for (a, b) in self.gsumsq.iter_mut().zip(&other.gsumsq) {
            *a += b;
        }
    }
}

fn mean_and_stderr(sum: f64, sumsq: f64, n: usize) -> (f64, f64) {
    let nf = n as f64;
    let mean = sum / nf;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = ((sumsq - nf * mean * mean) / (nf - 1.0)).max(0.0);
    (mean, (var / nf).sqrt())
}

/// Monte-Carlo estimates of several observables sharing one batch of `w`
/// draws. With `with_grad`, also returns `∂⟨Z_S⟩/∂θ_k` for every `k ∈ A(S)`.
///
/// Results are identical for any thread count: work is split into fixed
/// chunks, each with its own stream, and reduced in chunk order.
pub fn mc_batch<R: Rng + ?Sized>(
    c: &IqpCircuit,
    observables: &[Observable],
    n_samples: usize,
    with_grad: bool,
    rng: &mut R,
) -> Result<Vec<BatchEstimate>> {
    if n_samples == 0 {
        return invalid("Monte-Carlo estimation needs at least one sample");
    }
    let n = c.n_qubits();
    for s in observables {
        s.check(n)?;
    }
    let base_seed = rng::fork(rng);
    let actives: Vec<Vec<(u64, f64, usize)>> = observables.iter().map(|&s| active_set(c, s)).collect();
    let sizes: Vec<usize> = actives.iter().map(|a| if with_grad { a.len() } else { 0 }).collect();
    let wmask = full_mask(n);
    let n_chunks = n_samples.div_ceil(MC_CHUNK);

    let run_chunk = |chunk: usize| -> Vec<Moments> {
        let mut rng = rng::stream(base_seed, chunk as u64);
        let count = MC_CHUNK.min(n_samples - chunk * MC_CHUNK);
        let mut acc: Vec<Moments> = sizes.iter().map(|&k| Moments::zero(k)).collect();
        for _ in 0..count {
            let w: u64 = rng.random::<u64>() & wmask;
            for (active, m) in actives.iter().zip(acc.iter_mut()) {
                if active.is_empty() {
                    continue;
                }
                let s: f64 = active.iter().map(|&(g, t, _)| t * sign(g, w)).sum();
                let v = (2.0 * s).cos();
                m.sum += v;
                m.sumsq += v * v;
                if with_grad {
                    let sn = (2.0 * s).sin();
                    for (k, &(g, _, _)) in active.iter().enumerate() {
                        let d = -2.0 * sign(g, w) * sn;
                        m.gsum[k] += d;
                        m.gsumsq[k] += d * d;
                    }
                }
            }
        }
        acc
    };

    let mut total: Vec<Moments> = sizes.iter().map(|&k| Moments::zero(k)).collect();
    let mut start = 0;
    while start < n_chunks {
        let end = (start + MC_WAVE).min(n_chunks);
        let wave: Vec<Vec<Moments>> = (start..end).into_par_iter().map(run_chunk).collect();
        for chunk in &wave {
            for (t, m) in total.iter_mut().zip(chunk) {
                t.absorb(m);
            }
        }
        start = end;
    }

    Ok(actives
        .iter()
        .zip(total)
        .map(|(active, m)| {
            if active.is_empty() {
                return BatchEstimate { expval: Estimate::exact(1.0), grad: Vec::new(), grad_stderr: Vec::new() };
            }
            let (value, stderr) = mean_and_stderr(m.sum, m.sumsq, n_samples);
            let mut grad = Vec::new();
            let mut grad_stderr = Vec::new();
            if with_grad {
                for (k, &(_, _, idx)) in active.iter().enumerate() {
                    let (g, e) = mean_and_stderr(m.gsum[k], m.gsumsq[k], n_samples);
                    grad.push((idx, g));
                    grad_stderr.push(e);
                }
            }
            BatchEstimate { expval: Estimate { value, stderr, n_samples }, grad, grad_stderr }
        })
        .collect())
}

/// Unbiased Monte-Carlo estimate of `⟨Z_S⟩`. Deterministic (stderr 0) when no
/// gate anticommutes with `Z_S`.
pub fn expval_mc<R: Rng + ?Sized>(c: &IqpCircuit, s: Observable, n_samples: usize, rng: &mut R) -> Result<Estimate> {
    Ok(mc_batch(c, &[s], n_samples, false, rng)?.remove(0).expval)
}

/// Monte-Carlo gradient of `⟨Z_S⟩`; components outside `A(S)` are exactly 0.
pub fn grad_expval_mc<R: Rng + ?Sized>(
    c: &IqpCircuit,
    s: Observable,
    n_samples: usize,
    rng: &mut R,
) -> Result<GradientEstimate> {
    let est = mc_batch(c, &[s], n_samples, true, rng)?.remove(0);
    let mut values = vec![0.0; c.len()];
    let mut stderr = vec![0.0; c.len()];
    for (&(k, g), &e) in est.grad.iter().zip(&est.grad_stderr) {
        values[k] = g;
        stderr[k] = e;
    }
    Ok(GradientEstimate { values, stderr, n_samples: est.expval.n_samples })
}

/// Born distribution over all `2^n` bitstrings; index bit `i` is qubit `i`.
#[derive(Clone, Debug, PartialEq)]
pub struct BornDistribution {
    n_qubits: usize,
    probs: Vec<f64>,
}

impl BornDistribution {
    pub fn new(n_qubits: usize, probs: Vec<f64>) -> Result<Self> {
        if probs.len() != 1usize << n_qubits {
            return invalid(format!("expected {} probabilities, got {}", 1usize << n_qubits, probs.len()));
        }
        if probs.iter().any(|p| !(*p >= 0.0)) {
            return invalid("probabilities must be nonnegative");
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return invalid(format!("probabilities sum to {total}"));
        }
        Ok(BornDistribution { n_qubits, probs })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, x: u64) -> f64 {
        self.probs[x as usize]
    }

    /// `Σ_x p(x) (-1)^{|x ∧ S|}`.
    pub fn expval(&self, s: Observable) -> f64 {
        self.probs.iter().enumerate().map(|(x, p)| p * s.eval(x as u64)).sum()
    }

    /// `p(x_q = 1)`.
    pub fn marginal(&self, q: usize) -> f64 {
        self.probs.iter().enumerate().filter(|(x, _)| x >> q & 1 == 1).map(|(_, p)| p).sum()
    }

    pub fn sample<R: Rng + ?Sized>(&self, shots: usize, rng: &mut R) -> Vec<u64> {
        let dist = WeightedIndex::new(&self.probs).expect("normalized distribution");
        (0..shots).map(|_| dist.sample(rng) as u64).collect()
    }
}

fn check_exact(c: &IqpCircuit, max: usize, what: &'static str) -> Result<()> {
    if c.n_qubits() > max {
        Err(Error::Capacity { what, n: c.n_qubits(), max })
    } else {
        Ok(())
    }
}

/// `φ(w) = Σ_j θ_j (-1)^{|g_j ∧ w|}` for every `w`.
pub fn phase_vector(c: &IqpCircuit) -> Vec<f64> {
    let mut phases = vec![0.0f64; 1usize << c.n_qubits()];
    for (g, t) in c.gates() {
        phases[g.mask() as usize] += t;
    }
    fwht(&mut phases);
    phases
}

/// The full statevector of a circuit, kept for repeated exact queries.
#[derive(Clone, Debug)]
pub struct ExactState {
    n_qubits: usize,
    /// `e^{iφ(w)}` indexed by `w`.
    phasors: Vec<Complex64>,
    /// Computational-basis amplitudes.
    amps: Vec<Complex64>,
}

impl ExactState {
    pub fn new(c: &IqpCircuit) -> Result<Self> {
        check_exact(c, EXACT_MAX_QUBITS, "exact evaluation")?;
        let phasors: Vec<Complex64> = phase_vector(c).into_iter().map(|p| Complex64::from_polar(1.0, p)).collect();
        let mut amps = phasors.clone();
        fwht(&mut amps);
        let scale = 1.0 / amps.len() as f64;
        amps.iter_mut().for_each(|a| *a *= scale);
        Ok(ExactState { n_qubits: c.n_qubits(), phasors, amps })
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn distribution(&self) -> BornDistribution {
        let probs: Vec<f64> = self.amps.iter().map(|a| a.norm_sqr()).collect();
        BornDistribution { n_qubits: self.n_qubits, probs }
    }

    /// Chain rule through the Born rule: given `r(x) = ∂L/∂p(x)`, returns
    /// `∂L/∂θ_k` for every gate of `c` (which must be the circuit this state
    /// was built from).
    ///
    /// With `B = 2^{-n} WHT[r · conj(a)]` and `C(w) = Re[i e^{iφ(w)} B(w)]`,
    /// `∂L/∂θ_k = 2 Σ_w χ_k(w) C(w) = 2 WHT[C](g_k)`, so one pass yields the
    /// derivative for every possible generator.
    pub fn pullback(&self, c: &IqpCircuit, dl_dp: &[f64]) -> Vec<f64> {
        assert_eq!(dl_dp.len(), self.amps.len());
        let mut b: Vec<Complex64> = self.amps.iter().zip(dl_dp).map(|(a, r)| a.conj() * *r).collect();
        fwht(&mut b);
        let scale = 1.0 / b.len() as f64;
        let mut cw: Vec<f64> = self
            .phasors
            .iter()
            .zip(&b)
            .map(|(u, bw)| (Complex64::i() * u * bw).re * scale)
            .collect();
        fwht(&mut cw);
        c.generators().iter().map(|g| 2.0 * cw[g.mask() as usize]).collect()
    }
}

pub fn full_distribution(c: &IqpCircuit) -> Result<BornDistribution> {
    Ok(ExactState::new(c)?.distribution())
}

pub fn expval_exact(c: &IqpCircuit, s: Observable) -> Result<f64> {
    s.check(c.n_qubits())?;
    Ok(full_distribution(c)?.expval(s))
}

/// I.i.d. shots from the exact output distribution.
pub fn sample<R: Rng + ?Sized>(c: &IqpCircuit, shots: usize, rng: &mut R) -> Result<Vec<u64>> {
    Ok(full_distribution(c)?.sample(shots, rng))
}

/// Exact `∂p(x)/∂θ_k` from two transforms: the amplitude of `x` and its
/// derivative `2^{-n} WHT[i χ_k e^{iφ}](x)`.
pub fn parameter_influence(c: &IqpCircuit, x: u64, k: usize) -> Result<f64> {
    check_exact(c, INFLUENCE_MAX_QUBITS, "parameter influence")?;
    if k >= c.len() {
        return invalid(format!("gate index {k} out of range for {} gates", c.len()));
    }
    if x & !full_mask(c.n_qubits()) != 0 {
        return invalid("bitstring longer than the register");
    }
    let state = ExactState::new(c)?;
    let g = c.generators()[k].mask();
    let mut d: Vec<Complex64> = state
        .phasors
        .iter()
        .enumerate()
        .map(|(w, u)| Complex64::i() * sign(g, w as u64) * u)
        .collect();
    fwht(&mut d);
    let scale = 1.0 / d.len() as f64;
    let amp = state.amps[x as usize];
    Ok(2.0 * (amp.conj() * d[x as usize] * scale).re)
}
