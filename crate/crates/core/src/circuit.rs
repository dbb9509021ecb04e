//! IQP circuits: generators, parameter vectors, merging and text serialization.
//!
//! The state prepared by a circuit is `∏_j exp(iθ_j X_{g_j}) |0^n⟩`. All gates
//! are diagonal in the X basis, so they commute and generator order carries no
//! meaning. Circuits are nonetheless stored in a canonical order so that
//! parameter vectors line up across runs and serialize deterministically.

use std::cmp::Ordering;
use std::collections::HashSet;
use std::fmt;

use rand::Rng;
use rand_distr::{Distribution, Normal, Uniform};

use crate::bits::{self, MAX_QUBITS};
use crate::error::invalid;
use crate::{Error, Result};

/// A nonempty set of qubits, stored as a bitmask (`n ≤ 64`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Generator(u64);

impl Generator {
    pub fn from_mask(mask: u64) -> Result<Self> {
        if mask == 0 {
            return invalid("generator must act on at least one qubit");
        }
        Ok(Generator(mask))
    }

    /// Builds a generator from qubit indices. Indices must be strictly
    /// increasing and below 64.
    pub fn new(qubits: &[usize]) -> Result<Self> {
        let mut mask = 0u64;
        let mut prev: Option<usize> = None;
        for &q in qubits {
            if q >= MAX_QUBITS {
                return invalid(format!("qubit index {q} exceeds the 64-qubit limit"));
            }
            if prev.is_some_and(|p| q <= p) {
                return invalid(format!("generator indices must be strictly increasing: {qubits:?}"));
            }
            prev = Some(q);
            mask |= 1 << q;
        }
        Self::from_mask(mask)
    }

    pub fn single(q: usize) -> Self {
        Generator(1 << q)
    }

    pub fn pair(a: usize, b: usize) -> Self {
        assert_ne!(a, b, "pair generator needs two distinct qubits");
        Generator(1 << a | 1 << b)
    }

    #[inline]
    pub fn mask(self) -> u64 {
        self.0
    }

    #[inline]
    pub fn order(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn qubits(self) -> impl Iterator<Item = usize> {
        bits::indices(self.0)
    }

    pub fn contains(self, q: usize) -> bool {
        q < 64 && self.0 >> q & 1 == 1
    }

    /// Highest qubit index touched.
    pub fn last(self) -> usize {
        63 - self.0.leading_zeros() as usize
    }

    pub fn fits(self, n_qubits: usize) -> bool {
        self.0 & !bits::full_mask(n_qubits) == 0
    }
}

/// Canonical order: by gate order, then lexicographically by sorted indices.
impl Ord for Generator {
    fn cmp(&self, other: &Self) -> Ordering {
        self.order()
            .cmp(&other.order())
            .then_with(|| self.qubits().cmp(other.qubits()))
    }
}

impl PartialOrd for Generator {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Generator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for q in self.qubits() {
            if !first {
                f.write_str(" ")?;
            }
            write!(f, "{q}")?;
            first = false;
        }
        Ok(())
    }
}

/// How to fill the parameters of a freshly built circuit.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Init {
    Zeros,
    Normal { mean: f64, std: f64 },
    Uniform { low: f64, high: f64 },
    /// `N(0, std / order^decay)`: higher-order gates start closer to zero.
    OrderScaled { std: f64, decay: f64 },
}

impl Init {
    pub fn fill<R: Rng + ?Sized>(&self, generators: &[Generator], rng: &mut R) -> Result<Vec<f64>> {
        match *self {
            Init::Zeros => Ok(vec![0.0; generators.len()]),
            Init::Normal { mean, std } => {
                let dist = Normal::new(mean, std).map_err(|e| Error::InvalidArgument(e.to_string()))?;
                Ok(generators.iter().map(|_| dist.sample(rng)).collect())
            }
            Init::Uniform { low, high } => {
                let dist = Uniform::new(low, high).map_err(|e| Error::InvalidArgument(e.to_string()))?;
                Ok(generators.iter().map(|_| dist.sample(rng)).collect())
            }
            Init::OrderScaled { std, decay } => {
                let unit = Normal::new(0.0, 1.0).unwrap();
                Ok(generators
                    .iter()
                    .map(|g| {
                        let z: f64 = unit.sample(rng);
                        z * std / (g.order() as f64).powf(decay)
                    })
                    .collect())
            }
        }
    }
}

/// An immutable parameterized IQP circuit.
#[derive(Clone, Debug, PartialEq)]
pub struct IqpCircuit {
    n_qubits: usize,
    generators: Vec<Generator>,
    theta: Vec<f64>,
}

impl IqpCircuit {
    pub fn new(n_qubits: usize, generators: Vec<Generator>, theta: Vec<f64>) -> Result<Self> {
        if n_qubits == 0 || n_qubits > MAX_QUBITS {
            return invalid(format!("qubit count must be in 1..=64, got {n_qubits}"));
        }
        if generators.len() != theta.len() {
            return invalid(format!(
                "{} generators but {} parameters",
                generators.len(),
                theta.len()
            ));
        }
        let mut seen = HashSet::with_capacity(generators.len());
        for g in &generators {
            if !g.fits(n_qubits) {
                return invalid(format!("generator {{{g}}} does not fit in {n_qubits} qubits"));
            }
            if !seen.insert(*g) {
                return invalid(format!("duplicate generator {{{g}}}"));
            }
        }
        if let Some(t) = theta.iter().find(|t| !t.is_finite()) {
            return invalid(format!("non-finite parameter {t}"));
        }
        Ok(IqpCircuit { n_qubits, generators, theta })
    }

    /// A circuit with no gates; prepares `|0^n⟩`.
    pub fn empty(n_qubits: usize) -> Result<Self> {
        Self::new(n_qubits, Vec::new(), Vec::new())
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn generators(&self) -> &[Generator] {
        &self.generators
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn len(&self) -> usize {
        self.generators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.generators.is_empty()
    }

    pub fn gates(&self) -> impl Iterator<Item = (Generator, f64)> + '_ {
        self.generators.iter().copied().zip(self.theta.iter().copied())
    }

    /// Same topology, new parameters.
    pub fn with_theta(&self, theta: Vec<f64>) -> Result<Self> {
        if theta.len() != self.theta.len() {
            return invalid(format!("expected {} parameters, got {}", self.theta.len(), theta.len()));
        }
        if let Some(t) = theta.iter().find(|t| !t.is_finite()) {
            return invalid(format!("non-finite parameter {t}"));
        }
        Ok(IqpCircuit { theta, ..self.clone() })
    }

    pub fn position(&self, g: Generator) -> Option<usize> {
        self.generators.iter().position(|&h| h == g)
    }

    pub fn is_canonical(&self) -> bool {
        self.generators.windows(2).all(|w| w[0] < w[1])
    }

    /// Text form: header `iqp <n_qubits> <n_gates>`, then one line per gate
    /// with its qubit indices followed by the parameter. Floats use the
    /// shortest representation that round-trips exactly.
    pub fn to_text(&self) -> String {
        let mut out = format!("iqp {} {}\n", self.n_qubits, self.len());
        for (g, t) in self.gates() {
            out.push_str(&format!("{g} {t:?}\n"));
        }
        out
    }

    /// Parses [`IqpCircuit::to_text`] output. Blank lines and lines starting
    /// with `#` are ignored.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let (hline, header) = lines.next().ok_or(Error::Parse { line: 0, msg: "missing header".into() })?;
        let perr = |line: usize, msg: String| Error::Parse { line, msg };
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 3 || fields[0] != "iqp" {
            return Err(perr(hline, format!("expected `iqp <n_qubits> <n_gates>`, got {header:?}")));
        }
        let n: usize = fields[1].parse().map_err(|_| perr(hline, "bad qubit count".into()))?;
        let m: usize = fields[2].parse().map_err(|_| perr(hline, "bad gate count".into()))?;
        let mut generators = Vec::with_capacity(m);
        let mut theta = Vec::with_capacity(m);
        for (ln, line) in lines {
            let toks: Vec<&str> = line.split_whitespace().collect();
            if toks.len() < 2 {
                return Err(perr(ln, "gate line needs qubit indices and a parameter".into()));
            }
            let (qs, t) = toks.split_at(toks.len() - 1);
            let qubits = qs
                .iter()
                .map(|q| q.parse::<usize>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| perr(ln, format!("bad qubit index: {e}")))?;
            let g = Generator::new(&qubits).map_err(|e| perr(ln, e.to_string()))?;
            let t: f64 = t[0].parse().map_err(|e| perr(ln, format!("bad parameter: {e}")))?;
            generators.push(g);
            theta.push(t);
        }
        if generators.len() != m {
            return Err(perr(hline, format!("header announces {m} gates, found {}", generators.len())));
        }
        IqpCircuit::new(n, generators, theta)
    }
}

/// All qubit subsets of size `1..=max_order` in canonical order (by size, then
/// lexicographic).
pub fn full_order_generators(n: usize, max_order: usize) -> Result<Vec<Generator>> {
    if max_order == 0 || max_order > n || n > MAX_QUBITS {
        return invalid(format!("need 1 <= max_order <= n <= 64, got max_order={max_order}, n={n}"));
    }
    let mut out = Vec::new();
    for k in 1..=max_order {
        let mut idx: Vec<usize> = (0..k).collect();
        loop {
            out.push(Generator(idx.iter().fold(0u64, |m, &i| m | 1 << i)));
            // advance to the next k-combination in lexicographic order
            let Some(pos) = (0..k).rev().find(|&p| idx[p] < n - k + p) else {
                break;
            };
            idx[pos] += 1;
            for p in pos + 1..k {
                idx[p] = idx[p - 1] + 1;
            }
        }
    }
    Ok(out)
}

pub fn build_full_order_circuit<R: Rng + ?Sized>(
    n: usize,
    max_order: usize,
    init: Init,
    rng: &mut R,
) -> Result<IqpCircuit> {
    let generators = full_order_generators(n, max_order)?;
    let theta = init.fill(&generators, rng)?;
    IqpCircuit::new(n, generators, theta)
}

pub fn canonicalize(c: &IqpCircuit) -> IqpCircuit {
    let mut gates: Vec<(Generator, f64)> = c.gates().collect();
    gates.sort_by(|a, b| a.0.cmp(&b.0));
    let (generators, theta) = gates.into_iter().unzip();
    IqpCircuit { n_qubits: c.n_qubits, generators, theta }
}

/// Merges two circuits on the same register. Shared generators add their
/// parameters; the rest are carried over. Result is canonical.
pub fn combine_direct(base: &IqpCircuit, ctrl: &IqpCircuit) -> Result<IqpCircuit> {
    if base.n_qubits != ctrl.n_qubits {
        return invalid(format!(
            "cannot combine a {}-qubit circuit with a {}-qubit circuit",
            base.n_qubits, ctrl.n_qubits
        ));
    }
    let a = canonicalize(base);
    let b = canonicalize(ctrl);
    let mut generators = Vec::with_capacity(a.len() + b.len());
    let mut theta = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        let ord = match (a.generators.get(i), b.generators.get(j)) {
            (Some(x), Some(y)) => x.cmp(y),
            (Some(_), None) => Ordering::Less,
            _ => Ordering::Greater,
        };
        match ord {
            Ordering::Less => {
                generators.push(a.generators[i]);
                theta.push(a.theta[i]);
                i += 1;
            }
            Ordering::Greater => {
                generators.push(b.generators[j]);
                theta.push(b.theta[j]);
                j += 1;
            }
            Ordering::Equal => {
                generators.push(a.generators[i]);
                theta.push(a.theta[i] + b.theta[j]);
                i += 1;
                j += 1;
            }
        }
    }
    Ok(IqpCircuit { n_qubits: base.n_qubits, generators, theta })
}

/// Adds `extra` generators missing from `base` with zero parameters. The
/// original gates keep their positions; new ones are appended in the order
/// given, skipping duplicates.
pub fn embed_implicit(base: &IqpCircuit, extra: &[Generator]) -> Result<IqpCircuit> {
    let mut present: HashSet<Generator> = base.generators.iter().copied().collect();
    let mut generators = base.generators.clone();
    let mut theta = base.theta.clone();
    for &g in extra {
        if !g.fits(base.n_qubits) {
            return invalid(format!("generator {{{g}}} does not fit in {} qubits", base.n_qubits));
        }
        if present.insert(g) {
            generators.push(g);
            theta.push(0.0);
        }
    }
    Ok(IqpCircuit { n_qubits: base.n_qubits, generators, theta })
}
