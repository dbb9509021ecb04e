//! Decomposition of IQP circuits into `h`, `cx` and `rz`, and OpenQASM 3 text.
//!
//! `exp(iθ X_g)` is a Hadamard sandwich around `exp(iθ Z_g)`, which is a CNOT
//! ladder folding the parity of `g` onto its highest qubit, `rz(-2θ)` there,
//! and the reversed ladder. `rz(λ) = diag(e^{-iλ/2}, e^{iλ/2})` as in
//! OpenQASM. Hadamard pairs that meet on a wire are cancelled while the
//! program is assembled.

use std::fmt::Write as _;

use num_complex::Complex64;

use crate::circuit::IqpCircuit;
use crate::error::invalid;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Gate {
    H(usize),
    Cnot { control: usize, target: usize },
    Rz { qubit: usize, angle: f64 },
}

impl Gate {
    fn wires(self) -> (usize, Option<usize>) {
        match self {
            Gate::H(q) | Gate::Rz { qubit: q, .. } => (q, None),
            Gate::Cnot { control, target } => (control, Some(target)),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CrzProgram {
    n_qubits: usize,
    gates: Vec<Gate>,
}

/// Appends gates while cancelling `H·H` on the same wire.
struct Builder {
    ops: Vec<Option<Gate>>,
    stacks: Vec<Vec<usize>>,
}

impl Builder {
    fn new(n: usize) -> Self {
        Builder { ops: Vec::new(), stacks: vec![Vec::new(); n] }
    }

    fn push(&mut self, gate: Gate) {
        if let Gate::H(q) = gate {
            if let Some(&top) = self.stacks[q].last() {
                if self.ops[top] == Some(Gate::H(q)) {
                    self.ops[top] = None;
                    self.stacks[q].pop();
                    return;
                }
            }
        }
        let idx = self.ops.len();
        self.ops.push(Some(gate));
        let (a, b) = gate.wires();
        self.stacks[a].push(idx);
        if let Some(b) = b {
            self.stacks[b].push(idx);
        }
    }

    fn finish(self, n_qubits: usize) -> CrzProgram {
        CrzProgram { n_qubits, gates: self.ops.into_iter().flatten().collect() }
    }
}

pub fn to_crz_program(c: &IqpCircuit) -> CrzProgram {
    let mut b = Builder::new(c.n_qubits());
    for (g, theta) in c.gates() {
        let qs: Vec<usize> = g.qubits().collect();
        let last = *qs.last().expect("generators are nonempty");
        for &q in &qs {
            b.push(Gate::H(q));
        }
        for w in qs.windows(2) {
            b.push(Gate::Cnot { control: w[0], target: w[1] });
        }
        b.push(Gate::Rz { qubit: last, angle: -2.0 * theta });
        for w in qs.windows(2).rev() {
            b.push(Gate::Cnot { control: w[0], target: w[1] });
        }
        for &q in &qs {
            b.push(Gate::H(q));
        }
    }
    b.finish(c.n_qubits())
}

impl CrzProgram {
    pub fn new(n_qubits: usize, gates: Vec<Gate>) -> Result<Self> {
        for g in &gates {
            let (a, b) = g.wires();
            if a >= n_qubits || b.is_some_and(|b| b >= n_qubits) {
                return invalid(format!("gate {g:?} out of range for {n_qubits} qubits"));
            }
            if let Gate::Cnot { control, target } = g {
                if control == target {
                    return invalid("cx control and target coincide");
                }
            }
            if let Gate::Rz { angle, .. } = g {
                if !angle.is_finite() {
                    return invalid("non-finite rz angle");
                }
            }
        }
        Ok(CrzProgram { n_qubits, gates })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    /// Applies the program to `|0^n⟩`. Index bit `i` is qubit `i`.
    pub fn simulate(&self) -> Result<Vec<Complex64>> {
        if self.n_qubits > crate::evaluator::EXACT_MAX_QUBITS {
            return Err(Error::Capacity { what: "program simulation", n: self.n_qubits, max: crate::evaluator::EXACT_MAX_QUBITS });
        }
        let mut psi = vec![Complex64::new(0.0, 0.0); 1 << self.n_qubits];
        psi[0] = Complex64::new(1.0, 0.0);
        let r = std::f64::consts::FRAC_1_SQRT_2;
        for g in &self.gates {
            match *g {
                Gate::H(q) => {
                    let bit = 1usize << q;
                    for x in 0..psi.len() {
                        if x & bit == 0 {
                            let (a, b) = (psi[x], psi[x | bit]);
                            psi[x] = (a + b) * r;
                            psi[x | bit] = (a - b) * r;
                        }
                    }
                }
                Gate::Cnot { control, target } => {
                    let (cb, tb) = (1usize << control, 1usize << target);
                    for x in 0..psi.len() {
                        if x & cb != 0 && x & tb == 0 {
                            psi.swap(x, x | tb);
                        }
                    }
                }
                Gate::Rz { qubit, angle } => {
                    let lo = Complex64::from_polar(1.0, -angle / 2.0);
                    let hi = Complex64::from_polar(1.0, angle / 2.0);
                    for (x, a) in psi.iter_mut().enumerate() {
                        *a *= if x >> qubit & 1 == 1 { hi } else { lo };
                    }
                }
            }
        }
        Ok(psi)
    }

    pub fn to_qasm(&self) -> String {
        let n = self.n_qubits;
        let mut out = String::new();
        out.push_str("OPENQASM 3.0;\ninclude \"stdgates.inc\";\n");
        let _ = writeln!(out, "qubit[{n}] q;\nbit[{n}] c;");
        for g in &self.gates {
            let _ = match *g {
                Gate::H(q) => writeln!(out, "h q[{q}];"),
                Gate::Cnot { control, target } => writeln!(out, "cx q[{control}], q[{target}];"),
                Gate::Rz { qubit, angle } => writeln!(out, "rz({angle:?}) q[{qubit}];"),
            };
        }
        out.push_str("c = measure q;\n");
        out
    }

    /// Reads back the `h`/`cx`/`rz` subset written by [`CrzProgram::to_qasm`].
    pub fn from_qasm(text: &str) -> Result<Self> {
        let mut n_qubits = None;
        let mut gates = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split("//").next().unwrap_or("").trim();
            let perr = |msg: String| Error::Parse { line: i + 1, msg };
            let Some(stmt) = line.strip_suffix(';') else {
                if line.is_empty() {
                    continue;
                }
                return Err(perr(format!("missing semicolon: {line:?}")));
            };
            let stmt = stmt.trim();
            if stmt.starts_with("OPENQASM") || stmt.starts_with("include") || stmt.starts_with("bit[") || stmt.contains("measure") {
                continue;
            }
            if let Some(rest) = stmt.strip_prefix("qubit[") {
                let n = rest.split(']').next().unwrap_or("");
                n_qubits = Some(n.parse::<usize>().map_err(|e| perr(format!("bad register size: {e}")))?);
                continue;
            }
            let qubit = |tok: &str| -> Result<usize> {
                tok.trim()
                    .strip_prefix("q[")
                    .and_then(|t| t.strip_suffix(']'))
                    .and_then(|t| t.parse().ok())
                    .ok_or_else(|| perr(format!("bad qubit operand {tok:?}")))
            };
            if let Some(arg) = stmt.strip_prefix("h ") {
                gates.push(Gate::H(qubit(arg)?));
            } else if let Some(args) = stmt.strip_prefix("cx ") {
                let (a, b) = args.split_once(',').ok_or_else(|| perr("cx needs two operands".into()))?;
                gates.push(Gate::Cnot { control: qubit(a)?, target: qubit(b)? });
            } else if let Some(rest) = stmt.strip_prefix("rz(") {
                let (angle, arg) = rest.split_once(')').ok_or_else(|| perr("unterminated rz angle".into()))?;
                let angle: f64 = angle.trim().parse().map_err(|e| perr(format!("bad angle: {e}")))?;
                gates.push(Gate::Rz { qubit: qubit(arg)?, angle });
            } else {
                return Err(perr(format!("unsupported statement {stmt:?}")));
            }
        }
        let n = n_qubits.ok_or(Error::Parse { line: 0, msg: "missing qubit declaration".into() })?;
        CrzProgram::new(n, gates)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::Generator;
    use std::f64::consts::PI;

    #[test]
    fn single_qubit_pattern() {
        let c = IqpCircuit::new(1, vec![Generator::single(0)], vec![PI / 4.0]).unwrap();
        let p = to_crz_program(&c);
        assert_eq!(p.gates(), &[Gate::H(0), Gate::Rz { qubit: 0, angle: -PI / 2.0 }, Gate::H(0)]);
    }

    #[test]
    fn pair_pattern() {
        let c = IqpCircuit::new(2, vec![Generator::pair(0, 1)], vec![0.0]).unwrap();
        let p = to_crz_program(&c);
        assert_eq!(
            p.gates(),
            &[
                Gate::H(0),
                Gate::H(1),
                Gate::Cnot { control: 0, target: 1 },
                Gate::Rz { qubit: 1, angle: -0.0 },
                Gate::Cnot { control: 0, target: 1 },
                Gate::H(0),
                Gate::H(1),
            ]
        );
        let psi = p.simulate().unwrap();
        assert!((psi[0].norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn hadamards_cancel_between_gates() {
        let c = IqpCircuit::new(2, vec![Generator::single(0), Generator::single(1), Generator::pair(0, 1)], vec![0.1, 0.2, 0.3])
            .unwrap();
        let p = to_crz_program(&c);
        let hs = p.gates().iter().filter(|g| matches!(g, Gate::H(_))).count();
        assert_eq!(hs, 4);
    }

    #[test]
    fn qasm_round_trip() {
        let c = IqpCircuit::new(3, vec![Generator::single(2), Generator::new(&[0, 1, 2]).unwrap()], vec![0.123456789, -1.0 / 7.0])
            .unwrap();
        let p = to_crz_program(&c);
        let text = p.to_qasm();
        assert!(text.starts_with("OPENQASM 3.0;"));
        assert_eq!(CrzProgram::from_qasm(&text).unwrap(), p);
        assert!(CrzProgram::from_qasm("qubit[2] q;\nswap q[0], q[1];\n").is_err());
        assert!(CrzProgram::from_qasm("h q[0];\n").is_err());
        assert!(CrzProgram::from_qasm("qubit[1] q;\nh q[1];\n").is_err());
    }
}
