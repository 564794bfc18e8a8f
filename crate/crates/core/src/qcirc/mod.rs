//! Gate-level circuits, ideal statevector simulation, Pauli noise and shot
//! sampling.
//!
//! Qubit 0 is the leftmost character of every bitstring. Internally bit `q`
//! of an amplitude index is qubit `q`, and bit `k` of an outcome key is the
//! `k`-th measured qubit.

mod circuit;
mod noise;
mod sample;
mod state;

pub use circuit::{Circuit, Gate, GateKind, MAX_QUBITS};
pub use noise::{Confusion, NoiseModel};
pub use sample::{format_bitstring, parse_bitstring, sample, sample_with_offset, CountsMap, Sampler};
pub use state::{apply_gate, run_ideal, StateVector};
