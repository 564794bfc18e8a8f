use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Readout confusion matrix, row = true value, column = reported value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Confusion(pub [[f64; 2]; 2]);

impl Confusion {
    pub const IDENTITY: Confusion = Confusion([[1.0, 0.0], [0.0, 1.0]]);

    /// Same flip probability for both true values.
    pub fn symmetric(flip: f64) -> Self {
        Self::asymmetric(flip, flip)
    }

    /// `p01` = P(read 1 | true 0), `p10` = P(read 0 | true 1).
    pub fn asymmetric(p01: f64, p10: f64) -> Self {
        Confusion([[1.0 - p01, p01], [p10, 1.0 - p10]])
    }

    /// Probability that a true `bit` is misreported.
    pub fn flip_probability(&self, bit: u32) -> f64 {
        if bit == 0 {
            self.0[0][1]
        } else {
            self.0[1][0]
        }
    }

    pub fn is_identity(&self) -> bool {
        self.0[0][1] == 0.0 && self.0[1][0] == 0.0
    }

    pub fn validate(&self) -> Result<()> {
        for row in &self.0 {
            if row.iter().any(|p| !(0.0..=1.0).contains(p)) {
                return Err(Error::InvalidNoise(format!("confusion entry outside [0, 1]: {row:?}")));
            }
            if (row[0] + row[1] - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidNoise(format!("confusion row {row:?} does not sum to 1")));
            }
        }
        Ok(())
    }
}

impl Default for Confusion {
    fn default() -> Self {
        Self::IDENTITY
    }
}

/// Stochastic Pauli noise after every gate plus per-qubit readout confusion.
///
/// After a one-qubit gate a uniformly random non-identity Pauli hits the
/// operand with probability `p1`; after a two-qubit gate one of the 15
/// non-identity two-qubit Paulis hits the operands with probability `p2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub name: String,
    pub p1: f64,
    pub p2: f64,
    pub readout: Confusion,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub readout_overrides: BTreeMap<usize, Confusion>,
}

impl NoiseModel {
    pub const PRESETS: [&'static str; 3] = ["ideal", "mock-device", "device-like"];

    pub fn new(name: impl Into<String>, p1: f64, p2: f64, readout: Confusion) -> Result<Self> {
        let model = Self {
            name: name.into(),
            p1,
            p2,
            readout,
            readout_overrides: BTreeMap::new(),
        };
        model.validate()?;
        Ok(model)
    }

    pub fn ideal() -> Self {
        Self {
            name: "ideal".into(),
            p1: 0.0,
            p2: 0.0,
            readout: Confusion::IDENTITY,
            readout_overrides: BTreeMap::new(),
        }
    }

    /// Moderate noise; the correct-password all-zero syndrome survives in
    /// roughly one shot in ten on the 20-qubit phase-only pipeline.
    pub fn mock_device() -> Self {
        Self {
            name: "mock-device".into(),
            p1: 0.01,
            p2: 0.08,
            readout: Confusion::symmetric(0.04),
            readout_overrides: BTreeMap::new(),
        }
    }

    /// Heavy noise that drives the verification register close to uniform.
    pub fn device_like() -> Self {
        Self {
            name: "device-like".into(),
            p1: 0.05,
            p2: 0.3,
            readout: Confusion::symmetric(0.05),
            readout_overrides: BTreeMap::new(),
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "ideal" => Ok(Self::ideal()),
            "mock-device" => Ok(Self::mock_device()),
            "device-like" => Ok(Self::device_like()),
            other => Err(Error::UnknownPreset(other.to_string())),
        }
    }

    /// Depolarizing only, identity readout.
    pub fn depolarizing(p1: f64, p2: f64) -> Result<Self> {
        Self::new(format!("depolarizing-{p1}-{p2}"), p1, p2, Confusion::IDENTITY)
    }

    /// Symmetric readout flips only.
    pub fn readout_only(flip: f64) -> Result<Self> {
        Self::new(format!("readout-{flip}"), 0.0, 0.0, Confusion::symmetric(flip))
    }

    /// Same readout behaviour with the gate noise removed.
    pub fn without_gate_noise(&self) -> Self {
        Self {
            name: format!("{}-readout", self.name),
            p1: 0.0,
            p2: 0.0,
            readout: self.readout,
            readout_overrides: self.readout_overrides.clone(),
        }
    }

    pub fn with_qubit_readout(mut self, qubit: usize, confusion: Confusion) -> Result<Self> {
        confusion.validate()?;
        self.readout_overrides.insert(qubit, confusion);
        Ok(self)
    }

    pub fn confusion(&self, qubit: usize) -> Confusion {
        self.readout_overrides.get(&qubit).copied().unwrap_or(self.readout)
    }

    pub fn has_gate_noise(&self) -> bool {
        self.p1 > 0.0 || self.p2 > 0.0
    }

    pub fn is_ideal(&self) -> bool {
        !self.has_gate_noise()
            && self.readout.is_identity()
            && self.readout_overrides.values().all(Confusion::is_identity)
    }

    pub fn validate(&self) -> Result<()> {
        for (label, p) in [("p1", self.p1), ("p2", self.p2)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidNoise(format!("{label} = {p} outside [0, 1]")));
            }
        }
        self.readout.validate()?;
        self.readout_overrides.values().try_for_each(Confusion::validate)
    }
}
