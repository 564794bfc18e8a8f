use num_complex::Complex64;

use super::{Circuit, Gate};
use crate::error::{Error, Result};

/// Dense amplitude vector; bit `q` of an index is the value of qubit `q`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    num_qubits: usize,
    amps: Vec<Complex64>,
}

impl StateVector {
    /// `|0…0⟩` on `num_qubits` qubits.
    pub fn zero(num_qubits: usize) -> Result<Self> {
        if num_qubits > super::MAX_QUBITS {
            return Err(Error::TooManyQubits(num_qubits));
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << num_qubits];
        amps[0] = Complex64::new(1.0, 0.0);
        Ok(Self { num_qubits, amps })
    }

    pub fn from_amplitudes(num_qubits: usize, amps: Vec<Complex64>) -> Result<Self> {
        if num_qubits > super::MAX_QUBITS {
            return Err(Error::TooManyQubits(num_qubits));
        }
        if amps.len() != 1 << num_qubits {
            return Err(crate::error::contract(format!(
                "{} amplitudes for {num_qubits} qubits",
                amps.len()
            )));
        }
        Ok(Self { num_qubits, amps })
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Amplitude of the basis state written as a bitstring, qubit 0 first.
    pub fn amplitude_of(&self, bits: &str) -> Result<Complex64> {
        if bits.len() != self.num_qubits {
            return Err(Error::WidthMismatch {
                expected: self.num_qubits,
                found: bits.len(),
            });
        }
        let index = super::parse_bitstring(bits)?;
        Ok(self.amps[index as usize])
    }

    pub fn apply_gate(&mut self, gate: &Gate) -> Result<()> {
        gate.validate(self.num_qubits)?;
        let amps = &mut self.amps;
        match *gate {
            Gate::X(q) => {
                let bit = 1 << q;
                for i in 0..amps.len() {
                    if i & bit == 0 {
                        amps.swap(i, i | bit);
                    }
                }
            }
            Gate::Y(q) => {
                let bit = 1 << q;
                let i_unit = Complex64::new(0.0, 1.0);
                for i in 0..amps.len() {
                    if i & bit == 0 {
                        let (a0, a1) = (amps[i], amps[i | bit]);
                        amps[i] = -i_unit * a1;
                        amps[i | bit] = i_unit * a0;
                    }
                }
            }
            Gate::Z(q) => {
                let bit = 1 << q;
                for (i, a) in amps.iter_mut().enumerate() {
                    if i & bit != 0 {
                        *a = -*a;
                    }
                }
            }
            Gate::H(q) => {
                let bit = 1 << q;
                let r = std::f64::consts::FRAC_1_SQRT_2;
                for i in 0..amps.len() {
                    if i & bit == 0 {
                        let (a0, a1) = (amps[i], amps[i | bit]);
                        amps[i] = (a0 + a1) * r;
                        amps[i | bit] = (a0 - a1) * r;
                    }
                }
            }
            Gate::S(q) => {
                let bit = 1 << q;
                for (i, a) in amps.iter_mut().enumerate() {
                    if i & bit != 0 {
                        *a = Complex64::new(-a.im, a.re);
                    }
                }
            }
            Gate::Cnot { control, target } => {
                let (c, t) = (1 << control, 1 << target);
                for i in 0..amps.len() {
                    if i & c != 0 && i & t == 0 {
                        amps.swap(i, i | t);
                    }
                }
            }
            Gate::Swap(a, b) => {
                let (ba, bb) = (1 << a, 1 << b);
                for i in 0..amps.len() {
                    if i & ba != 0 && i & bb == 0 {
                        amps.swap(i, (i & !ba) | bb);
                    }
                }
            }
        }
        Ok(())
    }

    /// Marginal distribution of `measured` as `(key, probability)` pairs
    /// sorted by key, where bit `k` of a key is the outcome of `measured[k]`.
    /// Outcomes below 1e-20 are dropped as rounding dust.
    pub fn measurement_distribution(&self, measured: &[usize]) -> Result<Vec<(u32, f64)>> {
        for &q in measured {
            if q >= self.num_qubits {
                return Err(Error::QubitOutOfRange {
                    index: q,
                    num_qubits: self.num_qubits,
                });
            }
        }
        let mut marginal = vec![0.0f64; 1 << measured.len()];
        for (i, a) in self.amps.iter().enumerate() {
            let p = a.norm_sqr();
            if p == 0.0 {
                continue;
            }
            let mut key = 0usize;
            for (k, &q) in measured.iter().enumerate() {
                key |= ((i >> q) & 1) << k;
            }
            marginal[key] += p;
        }
        Ok(marginal
            .into_iter()
            .enumerate()
            .filter(|&(_, p)| p > 1e-20)
            .map(|(k, p)| (k as u32, p))
            .collect())
    }

    /// Largest amplitude deviation after removing the best global phase.
    pub fn distance_up_to_phase(&self, other: &StateVector) -> f64 {
        assert_eq!(self.amps.len(), other.amps.len(), "state sizes differ");
        let overlap: Complex64 = self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum();
        let phase = if overlap.norm() > 0.0 {
            overlap / overlap.norm()
        } else {
            Complex64::new(1.0, 0.0)
        };
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| (a * phase - b).norm())
            .fold(0.0, f64::max)
    }
}

/// Applies `gate` to a copy of `state`.
pub fn apply_gate(state: &StateVector, gate: &Gate) -> Result<StateVector> {
    let mut out = state.clone();
    out.apply_gate(gate)?;
    Ok(out)
}

/// Runs the circuit from `|0…0⟩` without noise.
pub fn run_ideal(circuit: &Circuit) -> Result<StateVector> {
    let mut state = StateVector::zero(circuit.num_qubits())?;
    for gate in circuit.gates() {
        state.apply_gate(gate)?;
    }
    Ok(state)
}
