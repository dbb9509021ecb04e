//! Adam training loops for base circuits, controllers and bias mitigation.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::circuit::{build_full_order_circuit, combine_direct, embed_implicit, IqpCircuit, Init};
use crate::controller::{
    construct_controller, get_control_gates, smart_initialize, ControlObjective, ControllerBundle, InitSpread,
    ObjectiveKind,
};
use crate::datasets::BitstringDataset;
use crate::error::invalid;
use crate::mmd::{
    exact_mmd_loss, mmd_loss, variance_penalty, BatchSizes, KernelConfig, LossReport, ModeAssignment, VarianceGradient,
    BIAS_MAX_QUBITS,
};
use crate::rng;
use crate::{Error, Result};

// Stream ids for the auxiliary draws of a training run; loss evaluation at
// step `t` uses stream `t`.
const INIT_STREAM: u64 = 1 << 40;
const CONTROLLER_STREAM: u64 = INIT_STREAM + 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    /// Subset-sampled MMD with Monte-Carlo expectation values. No qubit cap.
    MonteCarlo,
    /// Exact MMD² from the full distribution (`n ≤ 26`).
    Exact,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarianceGradientKind {
    Spsa,
    Exact,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub max_iters: usize,
    pub estimator: EstimatorKind,
    pub mc_samples: usize,
    pub subsets: usize,
    /// Kernel bandwidth; `None` uses `σ² = n/8`.
    pub kernel_sigma: Option<f64>,
    /// Weight of the mode-variance penalty in bias mitigation.
    pub lambda: f64,
    pub variance_gradient: VarianceGradientKind,
    pub spsa_delta: f64,
    /// Training stops once the smoothed loss improves by less than this over
    /// `patience` iterations.
    pub tolerance: f64,
    pub patience: usize,
    /// Weight of the newest loss in the exponential moving average.
    pub smoothing: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            max_iters: 2000,
            estimator: EstimatorKind::MonteCarlo,
            mc_samples: 2000,
            subsets: 64,
            kernel_sigma: None,
            lambda: 0.5,
            variance_gradient: VarianceGradientKind::Spsa,
            spsa_delta: 0.01,
            tolerance: 1e-4,
            patience: 50,
            smoothing: 0.1,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("learning_rate", self.learning_rate),
            ("epsilon", self.epsilon),
            ("spsa_delta", self.spsa_delta),
            ("tolerance", self.tolerance),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return invalid(format!("{name} must be positive, got {v}"));
            }
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return invalid("Adam betas must lie in [0, 1)");
        }
        if !(self.smoothing > 0.0 && self.smoothing <= 1.0) {
            return invalid(format!("smoothing must be in (0, 1], got {}", self.smoothing));
        }
        if !(self.lambda >= 0.0) {
            return invalid(format!("lambda must be nonnegative, got {}", self.lambda));
        }
        if self.mc_samples == 0 || self.subsets == 0 || self.patience == 0 {
            return invalid("mc_samples, subsets and patience must be positive");
        }
        if let Some(s) = self.kernel_sigma {
            KernelConfig::new(s)?;
        }
        Ok(())
    }

    pub fn kernel(&self, n: usize) -> Result<KernelConfig> {
        match self.kernel_sigma {
            Some(s) => KernelConfig::new(s),
            None => Ok(KernelConfig::for_qubits(n)),
        }
    }

    fn variance_gradient(&self) -> VarianceGradient {
        match self.variance_gradient {
            VarianceGradientKind::Spsa => VarianceGradient::Spsa { delta: self.spsa_delta },
            VarianceGradientKind::Exact => VarianceGradient::Exact,
        }
    }
}

/// A differentiable training objective. `step` selects the random stream
/// so stochastic objectives are reproducible.
pub trait Objective {
    fn evaluate(&self, theta: &[f64], step: usize) -> Result<LossReport>;
}

impl<F> Objective for F
where
    F: Fn(&[f64], usize) -> Result<LossReport>,
{
    fn evaluate(&self, theta: &[f64], step: usize) -> Result<LossReport> {
        self(theta, step)
    }
}

/// MMD of a fixed circuit topology against a dataset, optionally with the
/// mode-variance penalty.
pub struct CircuitObjective {
    topology: IqpCircuit,
    data: BitstringDataset,
    data_hist: Option<Vec<f64>>,
    kernel: KernelConfig,
    estimator: EstimatorKind,
    sizes: BatchSizes,
    penalty: Option<(ModeAssignment, f64, VarianceGradient)>,
    seed: u64,
}

impl CircuitObjective {
    pub fn new(topology: &IqpCircuit, data: &BitstringDataset, cfg: &TrainConfig) -> Result<Self> {
        cfg.validate()?;
        if topology.n_qubits() != data.n() {
            return invalid(format!("circuit has {} qubits, data has {} bits", topology.n_qubits(), data.n()));
        }
        let data_hist = match cfg.estimator {
            EstimatorKind::Exact => Some(data.histogram()?),
            EstimatorKind::MonteCarlo => None,
        };
        Ok(CircuitObjective {
            topology: topology.clone(),
            data: data.clone(),
            data_hist,
            kernel: cfg.kernel(data.n())?,
            estimator: cfg.estimator,
            sizes: BatchSizes { subsets: cfg.subsets, mc_samples: cfg.mc_samples },
            penalty: None,
            seed: cfg.seed,
        })
    }

    /// Adds `λ · Var(p_modes)` over the given patterns.
    pub fn with_penalty(mut self, patterns: &[u64], lambda: f64, grad: VarianceGradient) -> Result<Self> {
        let n = self.topology.n_qubits();
        if n > BIAS_MAX_QUBITS {
            return Err(Error::Capacity { what: "bias loss", n, max: BIAS_MAX_QUBITS });
        }
        if lambda > 0.0 {
            self.penalty = Some((ModeAssignment::new(n, patterns)?, lambda, grad));
        }
        Ok(self)
    }

    pub fn topology(&self) -> &IqpCircuit {
        &self.topology
    }
}

impl Objective for CircuitObjective {
    fn evaluate(&self, theta: &[f64], step: usize) -> Result<LossReport> {
        let c = self.topology.with_theta(theta.to_vec())?;
        let mut rng = rng::stream(self.seed, step as u64);
        let mut report = match (&self.estimator, &self.data_hist) {
            (EstimatorKind::Exact, Some(hist)) => exact_mmd_loss(&c, hist, &self.kernel)?,
            _ => mmd_loss(&c, &self.data, &self.kernel, self.sizes, &mut rng)?,
        };
        if let Some((modes, lambda, grad)) = &self.penalty {
            let (var, vgrad) = variance_penalty(&c, modes, *grad, &mut rng)?;
            report.value += lambda * var;
            report.variance_term = Some(var);
            for (g, v) in report.gradient.iter_mut().zip(vgrad) {
                *g += lambda * v;
            }
        }
        Ok(report)
    }
}

/// Evaluates an objective on `base + controller`, differentiating only the
/// controller parameters.
pub struct AdditiveObjective<O> {
    inner: O,
    base_theta: Vec<f64>,
    slots: Vec<usize>,
}

impl AdditiveObjective<CircuitObjective> {
    /// `inner` must be built on the topology returned by
    /// [`AdditiveObjective::combined_topology`].
    pub fn new(base: &IqpCircuit, controller: &IqpCircuit, inner: CircuitObjective) -> Result<Self> {
        let combined = Self::combined_topology(base, controller)?;
        if combined.generators() != inner.topology().generators() {
            return invalid("objective topology does not match base ∪ controller");
        }
        let slots = controller
            .generators()
            .iter()
            .map(|g| combined.generators().binary_search(g).expect("controller gate present in merge"))
            .collect();
        Ok(AdditiveObjective { inner, base_theta: combined.theta().to_vec(), slots })
    }

    /// Canonical merge of `base` with the controller's gates at zero.
    pub fn combined_topology(base: &IqpCircuit, controller: &IqpCircuit) -> Result<IqpCircuit> {
        combine_direct(base, &controller.with_theta(vec![0.0; controller.len()])?)
    }
}

impl<O: Objective> Objective for AdditiveObjective<O> {
    fn evaluate(&self, phi: &[f64], step: usize) -> Result<LossReport> {
        let mut theta = self.base_theta.clone();
        for (&slot, p) in self.slots.iter().zip(phi) {
            theta[slot] += p;
        }
        let mut report = self.inner.evaluate(&theta, step)?;
        report.gradient = self.slots.iter().map(|&s| report.gradient[s]).collect();
        Ok(report)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainRecord {
    pub iter: usize,
    pub loss: f64,
    pub grad_norm: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainHistory {
    pub records: Vec<TrainRecord>,
    /// Wall time of each iteration; kept apart from `records` so that
    /// identical runs compare equal.
    pub wall_seconds: Vec<f64>,
    pub converged_at: Option<usize>,
    pub final_params: Vec<f64>,
}

impl TrainHistory {
    pub fn iterations(&self) -> usize {
        self.records.len()
    }

    /// CSV with `iter,loss,grad_norm`, plus `seconds` when `with_time`.
    pub fn to_csv(&self, with_time: bool) -> String {
        let mut out = String::from(if with_time { "iter,loss,grad_norm,seconds\n" } else { "iter,loss,grad_norm\n" });
        for (r, s) in self.records.iter().zip(&self.wall_seconds) {
            if with_time {
                out.push_str(&format!("{},{:?},{:?},{:?}\n", r.iter, r.loss, r.grad_norm, s));
            } else {
                out.push_str(&format!("{},{:?},{:?}\n", r.iter, r.loss, r.grad_norm));
            }
        }
        out
    }

    /// Exponential moving average of the loss.
    pub fn smoothed(&self, alpha: f64) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.records.len());
        let mut s = None;
        for r in &self.records {
            let v = match s {
                None => r.loss,
                Some(prev) => (1.0 - alpha) * prev + alpha * r.loss,
            };
            s = Some(v);
            out.push(v);
        }
        out
    }
}

/// Adam on the parameters selected by `mask`; the rest are never written.
pub fn train(
    c: &IqpCircuit,
    objective: &dyn Objective,
    mask: &[bool],
    cfg: &TrainConfig,
) -> Result<(IqpCircuit, TrainHistory)> {
    train_observed(c, objective, mask, cfg, &mut |_, _| Ok(()))
}

/// [`train`], calling `observer(completed_iterations, theta)` after every
/// parameter update. An observer error aborts training.
pub fn train_observed(
    c: &IqpCircuit,
    objective: &dyn Objective,
    mask: &[bool],
    cfg: &TrainConfig,
    observer: &mut dyn FnMut(usize, &[f64]) -> Result<()>,
) -> Result<(IqpCircuit, TrainHistory)> {
    cfg.validate()?;
    if mask.len() != c.len() {
        return invalid(format!("mask has {} entries for {} parameters", mask.len(), c.len()));
    }
    let mut theta = c.theta().to_vec();
    let mut m = vec![0.0; theta.len()];
    let mut v = vec![0.0; theta.len()];
    let mut records = Vec::new();
    let mut wall_seconds = Vec::new();
    let mut smoothed: Vec<f64> = Vec::new();
    let mut converged_at = None;

    for iter in 0..cfg.max_iters {
        let start = Instant::now();
        let report = objective.evaluate(&theta, iter)?;
        let bad = |what| Error::NonFinite { what, iter, loss: report.value, params: theta.clone() };
        if !report.value.is_finite() {
            return Err(bad("loss"));
        }
        if report.gradient.len() != theta.len() {
            return invalid(format!("objective returned {} gradient entries for {} parameters", report.gradient.len(), theta.len()));
        }
        if report.gradient.iter().zip(mask).any(|(g, &on)| on && !g.is_finite()) {
            return Err(bad("gradient"));
        }
        let grad_norm = report
            .gradient
            .iter()
            .zip(mask)
            .filter(|(_, &on)| on)
            .map(|(g, _)| g * g)
            .sum::<f64>()
            .sqrt();
        records.push(TrainRecord { iter, loss: report.value, grad_norm });
        let s = match smoothed.last() {
            None => report.value,
            Some(prev) => (1.0 - cfg.smoothing) * prev + cfg.smoothing * report.value,
        };
        smoothed.push(s);

        if iter >= cfg.patience && smoothed[iter - cfg.patience] - s < cfg.tolerance {
            wall_seconds.push(start.elapsed().as_secs_f64());
            converged_at = Some(iter + 1);
            break;
        }

        let t = (iter + 1) as i32;
        let c1 = 1.0 - cfg.beta1.powi(t);
        let c2 = 1.0 - cfg.beta2.powi(t);
        for (k, g) in report.gradient.iter().enumerate() {
            if !mask[k] {
                continue;
            }
            m[k] = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * g;
            v[k] = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * g * g;
            theta[k] -= cfg.learning_rate * (m[k] / c1) / ((v[k] / c2).sqrt() + cfg.epsilon);
        }
        wall_seconds.push(start.elapsed().as_secs_f64());
        observer(iter + 1, &theta)?;
    }

    let out = c.with_theta(theta.clone())?;
    Ok((out, TrainHistory { records, wall_seconds, converged_at, final_params: theta }))
}

/// Keeps the samples satisfying `predicate`, in order.
pub fn filter_dataset(data: &BitstringDataset, predicate: impl Fn(u64) -> bool) -> Result<BitstringDataset> {
    let kept: Vec<u64> = data.samples().iter().copied().filter(|&x| predicate(x)).collect();
    if kept.is_empty() {
        return Err(Error::EmptyDataset(": no sample satisfies the target condition".into()));
    }
    Ok(BitstringDataset::new(data.n(), kept)?.with_provenance(data.provenance.clone()))
}

/// Full-order base circuit for `data` at its initial parameters, with its objective.
pub fn prepare_base(
    data: &BitstringDataset,
    max_order: usize,
    init: Init,
    cfg: &TrainConfig,
) -> Result<(IqpCircuit, CircuitObjective)> {
    let mut init_rng = rng::stream(cfg.seed, INIT_STREAM);
    let c = build_full_order_circuit(data.n(), max_order, init, &mut init_rng)?;
    let objective = CircuitObjective::new(&c, data, cfg)?;
    Ok((c, objective))
}

/// Builds and trains a full-order base circuit on `data`.
pub fn train_base(
    data: &BitstringDataset,
    max_order: usize,
    init: Init,
    cfg: &TrainConfig,
) -> Result<(IqpCircuit, TrainHistory)> {
    let (c, objective) = prepare_base(data, max_order, init, cfg)?;
    train(&c, &objective, &vec![true; c.len()], cfg)
}

/// Initial controller for `obj` on a frozen base, with the objective that
/// scores `base + controller` against the filtered data.
pub fn prepare_conditional(
    base: &IqpCircuit,
    obj: ControlObjective,
    data: &BitstringDataset,
    spread: InitSpread,
    cfg: &TrainConfig,
) -> Result<(ControllerBundle, AdditiveObjective<CircuitObjective>)> {
    let n = base.n_qubits();
    let target = filter_dataset(data, |x| obj.accepts(n, x))?;
    let mut init_rng = rng::stream(cfg.seed, CONTROLLER_STREAM);
    let bundle = construct_controller(n, obj, base, spread, &mut init_rng)?;
    let combined = AdditiveObjective::combined_topology(base, &bundle.circuit)?;
    let inner = CircuitObjective::new(&combined, &target, cfg)?;
    let objective = AdditiveObjective::new(base, &bundle.circuit, inner)?;
    Ok((bundle, objective))
}

/// Trains a controller on top of a frozen base so that `base + controller`
/// matches the subset of `data` selected by the objective.
pub fn train_conditional(
    base: &IqpCircuit,
    obj: ControlObjective,
    data: &BitstringDataset,
    spread: InitSpread,
    cfg: &TrainConfig,
) -> Result<(ControllerBundle, TrainHistory)> {
    let (bundle, objective) = prepare_conditional(base, obj, data, spread, cfg)?;
    let (circuit, history) = train(&bundle.circuit, &objective, &vec![true; bundle.circuit.len()], cfg)?;
    Ok((ControllerBundle { circuit, objective: obj }, history))
}

/// Base with bias-mitigation gates embedded and initialized, with the
/// `MMD + λ · Var(p_modes)` objective.
pub fn prepare_bias_mitigated(
    base: &IqpCircuit,
    data: &BitstringDataset,
    patterns: &[u64],
    spread: InitSpread,
    cfg: &TrainConfig,
) -> Result<(IqpCircuit, CircuitObjective)> {
    let n = base.n_qubits();
    if n > BIAS_MAX_QUBITS {
        return Err(Error::Capacity { what: "bias mitigation", n, max: BIAS_MAX_QUBITS });
    }
    let obj = ControlObjective::new(ObjectiveKind::BiasMitigation);
    let extra = get_control_gates(&obj, n, base)?;
    let embedded = embed_implicit(base, &extra)?;
    let added = &embedded.generators()[base.len()..];
    let start = if added.is_empty() {
        embedded
    } else {
        let mut init_rng = rng::stream(cfg.seed, CONTROLLER_STREAM);
        let fresh = smart_initialize(added, &obj, spread, &mut init_rng)?;
        let mut theta = embedded.theta().to_vec();
        theta[base.len()..].copy_from_slice(&fresh);
        embedded.with_theta(theta)?
    };
    let objective =
        CircuitObjective::new(&start, data, cfg)?.with_penalty(patterns, cfg.lambda, cfg.variance_gradient())?;
    Ok((start, objective))
}

/// Embeds bias-mitigation gates into the base topology and retrains every
/// parameter under `MMD + λ · Var(p_modes)`.
pub fn train_bias_mitigated(
    base: &IqpCircuit,
    data: &BitstringDataset,
    patterns: &[u64],
    spread: InitSpread,
    cfg: &TrainConfig,
) -> Result<(IqpCircuit, TrainHistory)> {
    let (start, objective) = prepare_bias_mitigated(base, data, patterns, spread, cfg)?;
    train(&start, &objective, &vec![true; start.len()], cfg)
}
