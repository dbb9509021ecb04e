//! Parameterized IQP circuits as classically trainable generative models.
//!
//! A circuit is a list of commuting gates `exp(iθ X_g)` acting on `|0^n⟩` and
//! measured in the computational basis. This crate provides:
//!
//! * [`circuit`]: circuit algebra (construction, merging, canonical order,
//!   text serialization) and [`crz`] export to an `h`/`cx`/`rz` program.
//! * [`evaluator`]: Monte-Carlo Pauli-Z expectation values with analytic
//!   gradients, plus exact Walsh–Hadamard oracles for desk-scale circuits.
//! * [`mmd`]: Gaussian-kernel MMD objectives and the variance-penalized bias loss.
//! * [`controller`]: lightweight controller circuits steering a frozen base model.
//! * [`trainer`]: Adam training loops for base, controller and bias-mitigated models.
//! * [`datasets`]: 2D Ising Gibbs samples and the binary-blob benchmark.
//! * [`analysis`]: Hamming-weight histograms, bias and overhead reports, heatmaps.

pub mod analysis;
pub mod bits;
pub mod circuit;
pub mod controller;
pub mod crz;
pub mod datasets;
mod error;
pub mod evaluator;
pub mod mmd;
pub mod rng;
pub mod trainer;
pub mod wht;

pub use circuit::{build_full_order_circuit, combine_direct, embed_implicit, Generator, IqpCircuit, Init};
pub use error::{Error, Result};
