//! Controller circuits that steer a frozen base model.
//!
//! A controller is a sparse IQP circuit of order ≤ 2 whose parameters add onto
//! the base circuit's parameters for shared generators. Its topology has three
//! layers: nearest-neighbour pairs (even-leading, then odd-leading), gates
//! chosen for the control objective, and one single-qubit gate per qubit.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::circuit::{canonicalize, Generator, IqpCircuit};
use crate::error::invalid;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ObjectiveKind {
    HighWeight,
    LowWeight,
    Balanced,
    BiasMitigation,
}

impl ObjectiveKind {
    pub fn name(self) -> &'static str {
        match self {
            ObjectiveKind::HighWeight => "high_weight",
            ObjectiveKind::LowWeight => "low_weight",
            ObjectiveKind::Balanced => "balanced",
            ObjectiveKind::BiasMitigation => "bias_mitigation",
        }
    }
}

impl fmt::Display for ObjectiveKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ObjectiveKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "high_weight" => Ok(ObjectiveKind::HighWeight),
            "low_weight" => Ok(ObjectiveKind::LowWeight),
            "balanced" => Ok(ObjectiveKind::Balanced),
            "bias_mitigation" => Ok(ObjectiveKind::BiasMitigation),
            _ => invalid(format!(
                "unknown objective {s:?} (expected high_weight, low_weight, balanced or bias_mitigation)"
            )),
        }
    }
}

/// A control objective, optionally with an explicit Hamming-weight window for
/// filtering the target data.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ControlObjective {
    pub kind: ObjectiveKind,
    pub hw_range: Option<(u32, u32)>,
}

impl ControlObjective {
    pub fn new(kind: ObjectiveKind) -> Self {
        ControlObjective { kind, hw_range: None }
    }

    /// Inclusive Hamming-weight window of the target data on `n` bits:
    /// high `[⌈2n/3⌉, n]`, low `[0, ⌊n/3⌋]`, balanced `n/2 ± ⌈n/8⌉`.
    /// `None` for bias mitigation, which keeps the full dataset.
    pub fn target_window(&self, n: usize) -> Option<(u32, u32)> {
        if self.hw_range.is_some() {
            return self.hw_range;
        }
        let n = n as u32;
        match self.kind {
            ObjectiveKind::HighWeight => Some(((2 * n).div_ceil(3), n)),
            ObjectiveKind::LowWeight => Some((0, n / 3)),
            ObjectiveKind::Balanced => {
                let half = n as f64 / 2.0;
                let tol = n.div_ceil(8) as f64;
                Some(((half - tol).ceil().max(0.0) as u32, (half + tol).floor() as u32))
            }
            ObjectiveKind::BiasMitigation => None,
        }
    }

    pub fn accepts(&self, n: usize, x: u64) -> bool {
        match self.target_window(n) {
            Some((lo, hi)) => (lo..=hi).contains(&x.count_ones()),
            None => true,
        }
    }
}

/// Absolute order-1 and order-2 parameters of a trained circuit, as an `n×n`
/// symmetric matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightMatrix {
    n: usize,
    w: Vec<f64>,
}

impl WeightMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.w[i * self.n + j]
    }

    /// `Σ_{j≠i} W[i][j]`.
    pub fn row_strength(&self, i: usize) -> f64 {
        (0..self.n).filter(|&j| j != i).map(|j| self.get(i, j)).sum()
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.w.chunks(self.n)
    }
}

pub fn extract_weights(base: &IqpCircuit) -> WeightMatrix {
    let n = base.n_qubits();
    let mut w = vec![0.0; n * n];
    for (g, t) in base.gates() {
        let qs: Vec<usize> = g.qubits().collect();
        match qs[..] {
            [i] => w[i * n + i] = t.abs(),
            [i, j] => {
                w[i * n + j] = t.abs();
                w[j * n + i] = t.abs();
            }
            _ => {}
        }
    }
    WeightMatrix { n, w }
}

/// Thresholds for bias-mitigation gate selection.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BiasSelection {
    /// Pairs with `W[i][j]` strictly below this are reinforced.
    pub threshold: f64,
    /// Maximum `|i − j|` for reinforced pairs.
    pub window: usize,
}

impl Default for BiasSelection {
    fn default() -> Self {
        BiasSelection { threshold: 0.1, window: 3 }
    }
}

/// Pairs `{i, j}` with weak learned coupling inside the window, plus single
/// qubits whose row strength is below the mean row strength.
pub fn select_bias_gates(w: &WeightMatrix, sel: BiasSelection) -> Vec<Generator> {
    let n = w.n;
    let mut out = Vec::new();
    for i in 0..n {
        for j in i + 1..n.min(i + sel.window + 1) {
            if w.get(i, j) < sel.threshold {
                out.push(Generator::pair(i, j));
            }
        }
    }
    let strengths: Vec<f64> = (0..n).map(|i| w.row_strength(i)).collect();
    let mean = strengths.iter().sum::<f64>() / n as f64;
    out.extend((0..n).filter(|&i| strengths[i] < mean).map(Generator::single));
    out.sort();
    out
}

/// Objective-specific gates (layer 2 of a controller).
pub fn get_control_gates(obj: &ControlObjective, n: usize, base: &IqpCircuit) -> Result<Vec<Generator>> {
    match obj.kind {
        ObjectiveKind::HighWeight | ObjectiveKind::LowWeight => {
            if n < 3 {
                return invalid(format!("weight objectives need at least 3 qubits, got {n}"));
            }
            Ok((0..n - 2).map(|i| Generator::pair(i, i + 2)).collect())
        }
        ObjectiveKind::Balanced => Ok(Vec::new()),
        ObjectiveKind::BiasMitigation => {
            if base.n_qubits() != n {
                return invalid(format!("base has {} qubits, expected {n}", base.n_qubits()));
            }
            Ok(select_bias_gates(&extract_weights(base), BiasSelection::default()))
        }
    }
}

/// Spread of the initial controller parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InitSpread {
    /// `|mean|` of single-qubit gates for weight objectives.
    pub center: f64,
    /// Std of single-qubit gates for weight objectives.
    pub weight_std: f64,
    /// Std of every other parameter, centered at zero.
    pub noise_std: f64,
}

impl Default for InitSpread {
    fn default() -> Self {
        InitSpread { center: 0.1, weight_std: 0.02, noise_std: 0.01 }
    }
}

/// Initial controller parameters. Single-qubit gates start near `-0.1` for
/// high weight and `+0.1` for low weight; everything else is small noise.
pub fn smart_initialize<R: Rng + ?Sized>(
    gates: &[Generator],
    obj: &ControlObjective,
    spread: InitSpread,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if gates.is_empty() {
        return invalid("no gates to initialize");
    }
    let mk = |m: f64, s: f64| Normal::new(m, s).map_err(|e| Error::InvalidArgument(e.to_string()));
    let noise = mk(0.0, spread.noise_std)?;
    let single = match obj.kind {
        ObjectiveKind::HighWeight => mk(-spread.center, spread.weight_std)?,
        ObjectiveKind::LowWeight => mk(spread.center, spread.weight_std)?,
        _ => noise,
    };
    Ok(gates.iter().map(|g| if g.order() == 1 { single.sample(rng) } else { noise.sample(rng) }).collect())
}

#[derive(Clone, Debug, PartialEq)]
pub struct ControllerBundle {
    pub circuit: IqpCircuit,
    pub objective: ControlObjective,
}

impl ControllerBundle {
    pub fn phi(&self) -> &[f64] {
        self.circuit.theta()
    }

    /// Circuit text format preceded by a comment recording objective and seed.
    pub fn to_text(&self, seed: u64) -> String {
        format!("# controller objective={} seed={seed}\n{}", self.objective.kind, self.circuit.to_text())
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let header = text
            .lines()
            .find(|l| l.trim_start().starts_with("# controller"))
            .ok_or(Error::Parse { line: 1, msg: "missing `# controller` header".into() })?;
        let kind = header
            .split_whitespace()
            .find_map(|t| t.strip_prefix("objective="))
            .ok_or(Error::Parse { line: 1, msg: "controller header lacks objective".into() })?
            .parse()?;
        Ok(ControllerBundle { circuit: IqpCircuit::from_text(text)?, objective: ControlObjective::new(kind) })
    }
}

/// Controller topology without parameters, deduplicated and canonical.
pub fn controller_gates(n: usize, obj: &ControlObjective, base: &IqpCircuit) -> Result<Vec<Generator>> {
    if n < 4 {
        return invalid(format!("controllers need at least 4 qubits, got {n}"));
    }
    let mut gates: Vec<Generator> = Vec::new();
    // layer 1: even-leading then odd-leading neighbours
    for start in [0, 1] {
        gates.extend((start..n - 1).step_by(2).map(|i| Generator::pair(i, i + 1)));
    }
    gates.extend(get_control_gates(obj, n, base)?);
    gates.extend((0..n).map(Generator::single));
    let mut seen = HashSet::new();
    gates.retain(|g| seen.insert(*g));
    gates.sort();
    Ok(gates)
}

pub fn construct_controller<R: Rng + ?Sized>(
    n: usize,
    obj: ControlObjective,
    base: &IqpCircuit,
    spread: InitSpread,
    rng: &mut R,
) -> Result<ControllerBundle> {
    let gates = controller_gates(n, &obj, base)?;
    let phi = smart_initialize(&gates, &obj, spread, rng)?;
    let circuit = canonicalize(&IqpCircuit::new(n, gates, phi)?);
    Ok(ControllerBundle { circuit, objective: obj })
}

/// Per-pattern, per-qubit sum of `|θ|` over generators contained in the
/// pattern's one-bits. A diagnostic reconstruction; rows follow `patterns`.
pub fn pattern_importance(c: &IqpCircuit, patterns: &[u64]) -> Vec<Vec<f64>> {
    patterns
        .iter()
        .map(|&p| {
            let mut row = vec![0.0; c.n_qubits()];
            for (g, t) in c.gates().filter(|(g, _)| g.mask() & !p == 0) {
                for q in g.qubits() {
                    row[q] += t.abs();
                }
            }
            row
        })
        .collect()
}
