use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest register the dense simulator accepts.
pub const MAX_QUBITS: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GateKind {
    X,
    Y,
    Z,
    H,
    S,
    Cnot,
    Swap,
}

/// A Clifford gate on explicit qubit indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Gate {
    X(usize),
    Y(usize),
    Z(usize),
    H(usize),
    S(usize),
    Cnot { control: usize, target: usize },
    Swap(usize, usize),
}

impl Gate {
    pub fn kind(&self) -> GateKind {
        match self {
            Gate::X(_) => GateKind::X,
            Gate::Y(_) => GateKind::Y,
            Gate::Z(_) => GateKind::Z,
            Gate::H(_) => GateKind::H,
            Gate::S(_) => GateKind::S,
            Gate::Cnot { .. } => GateKind::Cnot,
            Gate::Swap(..) => GateKind::Swap,
        }
    }

    /// Operand qubits, control first for CNOT.
    pub fn operands(&self) -> impl Iterator<Item = usize> {
        let (a, b) = match *self {
            Gate::X(q) | Gate::Y(q) | Gate::Z(q) | Gate::H(q) | Gate::S(q) => (q, None),
            Gate::Cnot { control, target } => (control, Some(target)),
            Gate::Swap(a, b) => (a, Some(b)),
        };
        std::iter::once(a).chain(b)
    }

    pub fn is_two_qubit(&self) -> bool {
        matches!(self, Gate::Cnot { .. } | Gate::Swap(..))
    }

    /// Relabels every operand through `f`.
    pub fn map_qubits(&self, f: impl Fn(usize) -> usize) -> Gate {
        match *self {
            Gate::X(q) => Gate::X(f(q)),
            Gate::Y(q) => Gate::Y(f(q)),
            Gate::Z(q) => Gate::Z(f(q)),
            Gate::H(q) => Gate::H(f(q)),
            Gate::S(q) => Gate::S(f(q)),
            Gate::Cnot { control, target } => Gate::Cnot {
                control: f(control),
                target: f(target),
            },
            Gate::Swap(a, b) => Gate::Swap(f(a), f(b)),
        }
    }

    pub fn validate(&self, num_qubits: usize) -> Result<()> {
        for q in self.operands() {
            if q >= num_qubits {
                return Err(Error::QubitOutOfRange { index: q, num_qubits });
            }
        }
        match *self {
            Gate::Cnot { control, target } if control == target => Err(Error::DuplicateOperand(control)),
            Gate::Swap(a, b) if a == b => Err(Error::DuplicateOperand(a)),
            _ => Ok(()),
        }
    }
}

/// An ordered gate list over a fixed register with terminal measurements.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Circuit {
    num_qubits: usize,
    gates: Vec<Gate>,
    measured: Vec<usize>,
}

impl Circuit {
    pub fn new(num_qubits: usize) -> Result<Self> {
        if num_qubits > MAX_QUBITS {
            return Err(Error::TooManyQubits(num_qubits));
        }
        Ok(Self {
            num_qubits,
            gates: Vec::new(),
            measured: Vec::new(),
        })
    }

    /// Builds a circuit from parts, validating every gate and measurement.
    pub fn from_parts(num_qubits: usize, gates: Vec<Gate>, measured: Vec<usize>) -> Result<Self> {
        let mut circuit = Self::new(num_qubits)?;
        for gate in gates {
            circuit.push(gate)?;
        }
        for q in measured {
            circuit.measure(q)?;
        }
        Ok(circuit)
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    /// Measured qubits in bitstring order.
    pub fn measured(&self) -> &[usize] {
        &self.measured
    }

    pub fn push(&mut self, gate: Gate) -> Result<&mut Self> {
        gate.validate(self.num_qubits)?;
        self.gates.push(gate);
        Ok(self)
    }

    pub fn extend_gates(&mut self, gates: impl IntoIterator<Item = Gate>) -> Result<&mut Self> {
        for gate in gates {
            self.push(gate)?;
        }
        Ok(self)
    }

    /// Inserts gates before position `index` of the gate list.
    pub fn insert_gates(&mut self, index: usize, gates: &[Gate]) -> Result<()> {
        if index > self.gates.len() {
            return Err(crate::error::contract(format!(
                "insertion point {index} beyond {} gates",
                self.gates.len()
            )));
        }
        for gate in gates {
            gate.validate(self.num_qubits)?;
        }
        self.gates.splice(index..index, gates.iter().copied());
        Ok(())
    }

    pub fn measure(&mut self, qubit: usize) -> Result<&mut Self> {
        if qubit >= self.num_qubits {
            return Err(Error::QubitOutOfRange {
                index: qubit,
                num_qubits: self.num_qubits,
            });
        }
        if self.measured.contains(&qubit) {
            return Err(Error::DuplicateMeasurement(qubit));
        }
        self.measured.push(qubit);
        Ok(self)
    }

    pub fn measure_all(&mut self) -> &mut Self {
        self.measured = (0..self.num_qubits).collect();
        self
    }

    /// Copy of this circuit on a larger register; indices are unchanged.
    pub fn widened(&self, num_qubits: usize) -> Result<Self> {
        if num_qubits < self.num_qubits {
            return Err(crate::error::contract(format!(
                "cannot narrow a {}-qubit circuit to {num_qubits}",
                self.num_qubits
            )));
        }
        let mut out = Self::new(num_qubits)?;
        out.gates = self.gates.clone();
        out.measured = self.measured.clone();
        Ok(out)
    }

    /// Gate-reversed adjoint. `S†` is emitted as three `S` gates.
    pub fn inverse(&self) -> Self {
        let mut gates = Vec::with_capacity(self.gates.len());
        for gate in self.gates.iter().rev() {
            match *gate {
                Gate::S(q) => gates.extend([Gate::S(q); 3]),
                g => gates.push(g),
            }
        }
        Self {
            num_qubits: self.num_qubits,
            gates,
            measured: Vec::new(),
        }
    }

    /// Same circuit with every SWAP written as three CNOTs.
    pub fn decompose_swaps(&self) -> Self {
        let mut gates = Vec::with_capacity(self.gates.len());
        for gate in &self.gates {
            match *gate {
                Gate::Swap(a, b) => gates.extend([
                    Gate::Cnot { control: a, target: b },
                    Gate::Cnot { control: b, target: a },
                    Gate::Cnot { control: a, target: b },
                ]),
                g => gates.push(g),
            }
        }
        Self {
            num_qubits: self.num_qubits,
            gates,
            measured: self.measured.clone(),
        }
    }

    /// Depth over {X, Y, Z, H, S, CNOT}, counting a SWAP as three CNOTs.
    pub fn native_depth(&self) -> usize {
        self.decompose_swaps().depth()
    }

    /// Longest chain of gates that share qubits (as-soon-as-possible layering).
    pub fn depth(&self) -> usize {
        let mut level = vec![0usize; self.num_qubits];
        let mut depth = 0;
        for gate in &self.gates {
            let layer = gate.operands().map(|q| level[q]).max().unwrap_or(0) + 1;
            for q in gate.operands() {
                level[q] = layer;
            }
            depth = depth.max(layer);
        }
        depth
    }

    pub fn x(&mut self, q: usize) -> &mut Self {
        self.push_checked(Gate::X(q))
    }

    pub fn y(&mut self, q: usize) -> &mut Self {
        self.push_checked(Gate::Y(q))
    }

    pub fn z(&mut self, q: usize) -> &mut Self {
        self.push_checked(Gate::Z(q))
    }

    pub fn h(&mut self, q: usize) -> &mut Self {
        self.push_checked(Gate::H(q))
    }

    pub fn s(&mut self, q: usize) -> &mut Self {
        self.push_checked(Gate::S(q))
    }

    pub fn cx(&mut self, control: usize, target: usize) -> &mut Self {
        self.push_checked(Gate::Cnot { control, target })
    }

    pub fn swap(&mut self, a: usize, b: usize) -> &mut Self {
        self.push_checked(Gate::Swap(a, b))
    }

    // Builder shorthands panic on bad operands; `push` is the fallible form.
    fn push_checked(&mut self, gate: Gate) -> &mut Self {
        if let Err(e) = gate.validate(self.num_qubits) {
            panic!("invalid gate {gate:?}: {e}");
        }
        self.gates.push(gate);
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn depth_of_serial_chain() {
        let mut c = Circuit::new(1).unwrap();
        c.h(0).x(0).z(0);
        assert_eq!(c.depth(), 3);
    }

    #[test]
    fn depth_of_parallel_layer() {
        let mut c = Circuit::new(3).unwrap();
        c.h(0).h(1).h(2);
        assert_eq!(c.depth(), 1);
    }

    #[test]
    fn depth_counts_two_qubit_dependencies() {
        let mut c = Circuit::new(3).unwrap();
        c.h(0).cx(0, 1).h(2).cx(1, 2);
        assert_eq!(c.depth(), 3);
    }

    #[test]
    fn swap_counts_three_in_native_depth() {
        let mut c = Circuit::new(3).unwrap();
        c.swap(0, 1).h(2);
        assert_eq!(c.depth(), 1);
        assert_eq!(c.native_depth(), 3);
        let s = crate::qcirc::run_ideal(&{
            let mut d = Circuit::new(2).unwrap();
            d.x(0).swap(0, 1);
            d.decompose_swaps()
        })
        .unwrap();
        assert!((s.amplitude_of("01").unwrap().re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_operands() {
        let mut c = Circuit::new(2).unwrap();
        assert!(matches!(
            c.push(Gate::H(2)),
            Err(Error::QubitOutOfRange { index: 2, .. })
        ));
        assert!(matches!(
            c.push(Gate::Cnot { control: 1, target: 1 }),
            Err(Error::DuplicateOperand(1))
        ));
        assert!(matches!(c.push(Gate::Swap(0, 0)), Err(Error::DuplicateOperand(0))));
    }

    #[test]
    fn rejects_oversized_register_and_duplicate_measurement() {
        assert!(matches!(Circuit::new(25), Err(Error::TooManyQubits(25))));
        let mut c = Circuit::new(2).unwrap();
        c.measure(1).unwrap();
        assert!(matches!(c.measure(1), Err(Error::DuplicateMeasurement(1))));
    }

    #[test]
    fn insert_gates_splices_at_position() {
        let mut c = Circuit::new(2).unwrap();
        c.h(0).cx(0, 1);
        c.insert_gates(1, &[Gate::X(1)]).unwrap();
        assert_eq!(
            c.gates(),
            &[Gate::H(0), Gate::X(1), Gate::Cnot { control: 0, target: 1 }]
        );
    }
}
