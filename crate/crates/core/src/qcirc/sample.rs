use std::collections::{BTreeMap, HashMap};
use std::io::Write;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{run_ideal, Circuit, Gate, NoiseModel};
use crate::error::{Error, Result};

/// Renders the low `width` bits of `key`, bit 0 first.
pub fn format_bitstring(key: u32, width: usize) -> String {
    (0..width)
        .map(|k| if (key >> k) & 1 == 1 { '1' } else { '0' })
        .collect()
}

/// Inverse of [`format_bitstring`].
pub fn parse_bitstring(bits: &str) -> Result<u32> {
    if bits.len() > 32 {
        return Err(Error::InvalidBitstring(bits.to_string()));
    }
    bits.chars().enumerate().try_fold(0u32, |acc, (k, c)| match c {
        '0' => Ok(acc),
        '1' => Ok(acc | (1 << k)),
        _ => Err(Error::InvalidBitstring(bits.to_string())),
    })
}

/// Histogram of measured bitstrings.
///
/// Keys are stored as integers whose bit `k` is the `k`-th measured qubit,
/// i.e. the `k`-th character of the bitstring.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountsMap {
    width: usize,
    shots: u64,
    counts: BTreeMap<u32, u64>,
}

impl CountsMap {
    pub fn new(width: usize) -> Self {
        Self {
            width,
            shots: 0,
            counts: BTreeMap::new(),
        }
    }

    pub fn from_keys(width: usize, keys: impl IntoIterator<Item = u32>) -> Self {
        let mut out = Self::new(width);
        for key in keys {
            out.record(key, 1);
        }
        out
    }

    pub fn record(&mut self, key: u32, n: u64) {
        debug_assert!(self.width >= 32 || key >> self.width == 0);
        *self.counts.entry(key).or_default() += n;
        self.shots += n;
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn shots(&self) -> u64 {
        self.shots
    }

    pub fn get(&self, key: u32) -> u64 {
        self.counts.get(&key).copied().unwrap_or(0)
    }

    pub fn get_str(&self, bits: &str) -> Result<u64> {
        if bits.len() != self.width {
            return Err(Error::WidthMismatch {
                expected: self.width,
                found: bits.len(),
            });
        }
        Ok(self.get(parse_bitstring(bits)?))
    }

    pub fn frequency(&self, key: u32) -> f64 {
        if self.shots == 0 {
            0.0
        } else {
            self.get(key) as f64 / self.shots as f64
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, u64)> + '_ {
        self.counts.iter().map(|(&k, &n)| (k, n))
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// Every key XORed with `mask`.
    pub fn xor_all(&self, mask: u32) -> Self {
        let mut out = Self::new(self.width);
        for (k, n) in self.iter() {
            out.record(k ^ mask, n);
        }
        out
    }

    pub fn merge(&mut self, other: &CountsMap) -> Result<()> {
        if other.width != self.width {
            return Err(Error::WidthMismatch {
                expected: self.width,
                found: other.width,
            });
        }
        for (k, n) in other.iter() {
            self.record(k, n);
        }
        Ok(())
    }

    /// Counts keyed by bitstring, in lexicographic order.
    pub fn to_bitstrings(&self) -> BTreeMap<String, u64> {
        self.iter().map(|(k, n)| (format_bitstring(k, self.width), n)).collect()
    }

    /// Two-column CSV: bitstring, relative frequency.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(writer);
        out.write_record(["bitstring", "frequency"])?;
        for (bits, n) in self.to_bitstrings() {
            let freq = n as f64 / self.shots.max(1) as f64;
            out.write_record([bits, format!("{freq:.8}")])?;
        }
        out.flush()?;
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct CountsRepr {
    shots: u64,
    counts: BTreeMap<String, u64>,
}

impl Serialize for CountsMap {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        CountsRepr {
            shots: self.shots,
            counts: self.to_bitstrings(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for CountsMap {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        use serde::de::Error as _;
        let repr = CountsRepr::deserialize(deserializer)?;
        let width = repr.counts.keys().next().map_or(0, String::len);
        let mut out = CountsMap::new(width);
        for (bits, n) in repr.counts {
            if bits.len() != width {
                return Err(D::Error::custom(format!(
                    "bitstring `{bits}` has width {}, expected {width}",
                    bits.len()
                )));
            }
            out.record(parse_bitstring(&bits).map_err(D::Error::custom)?, n);
        }
        if out.shots != repr.shots {
            return Err(D::Error::custom(format!(
                "counts sum to {} but shots = {}",
                out.shots, repr.shots
            )));
        }
        Ok(out)
    }
}

/// Measured-bit flips caused by each Pauli component on a gate's operands.
#[derive(Debug, Clone, Copy)]
struct GateFault {
    two_qubit: bool,
    /// X on operand 0, Z on operand 0, X on operand 1, Z on operand 1.
    masks: [u32; 4],
}

/// Precomputed shot sampler for one circuit.
///
/// Every gate is Clifford and every fault is a Pauli, so a fault inserted
/// after gate `g` is equivalent to a fixed set of flips on the measured bits.
/// Shots draw an outcome from the ideal distribution, XOR in the flips of
/// the sampled faults, then pass each bit through its readout confusion.
#[derive(Debug, Clone)]
pub struct Sampler {
    width: usize,
    outcomes: Vec<u32>,
    weights: WeightedIndex<f64>,
    faults: Vec<GateFault>,
    p1: f64,
    p2: f64,
    /// P(flip | true 0), P(flip | true 1) per measured bit.
    readout: Vec<(f64, f64)>,
}

impl Sampler {
    pub fn new(circuit: &Circuit, noise: Option<&NoiseModel>) -> Result<Self> {
        if let Some(model) = noise {
            model.validate()?;
        }
        let state = run_ideal(circuit)?;
        let dist = state.measurement_distribution(circuit.measured())?;
        let (outcomes, probs): (Vec<u32>, Vec<f64>) = dist.into_iter().unzip();
        let weights =
            WeightedIndex::new(&probs).map_err(|e| crate::error::contract(format!("degenerate distribution: {e}")))?;

        let (p1, p2) = noise.map_or((0.0, 0.0), |m| (m.p1, m.p2));
        let faults = if p1 > 0.0 || p2 > 0.0 {
            fault_masks(circuit)
        } else {
            Vec::new()
        };
        let readout = circuit
            .measured()
            .iter()
            .map(|&q| {
                noise.map_or((0.0, 0.0), |m| {
                    let c = m.confusion(q);
                    (c.flip_probability(0), c.flip_probability(1))
                })
            })
            .collect();
        Ok(Self {
            width: circuit.measured().len(),
            outcomes,
            weights,
            faults,
            p1,
            p2,
            readout,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// One shot. `offset` is XORed into the true outcome before readout.
    pub fn shot<R: Rng>(&self, rng: &mut R, offset: u32) -> u32 {
        let mut key = self.outcomes[self.weights.sample(rng)] ^ offset;
        for fault in &self.faults {
            if fault.two_qubit {
                if self.p2 > 0.0 && rng.random::<f64>() < self.p2 {
                    let pauli = rng.random_range(1..16u32);
                    for (k, mask) in fault.masks.iter().enumerate() {
                        if (pauli >> k) & 1 == 1 {
                            key ^= mask;
                        }
                    }
                }
            } else if self.p1 > 0.0 && rng.random::<f64>() < self.p1 {
                let pauli = rng.random_range(1..4u32);
                if pauli & 1 == 1 {
                    key ^= fault.masks[0];
                }
                if pauli & 2 == 2 {
                    key ^= fault.masks[1];
                }
            }
        }
        for (k, &(flip0, flip1)) in self.readout.iter().enumerate() {
            let p = if (key >> k) & 1 == 0 { flip0 } else { flip1 };
            if p > 0.0 && rng.random::<f64>() < p {
                key ^= 1 << k;
            }
        }
        key
    }

    /// Per-shot outcomes in order, deterministic for a fixed seed.
    pub fn shots(&self, shots: u64, seed: u64, offset: u32) -> Vec<u32> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..shots).map(|_| self.shot(&mut rng, offset)).collect()
    }

    pub fn counts(&self, shots: u64, seed: u64, offset: u32) -> CountsMap {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut tally: HashMap<u32, u64> = HashMap::new();
        for _ in 0..shots {
            *tally.entry(self.shot(&mut rng, offset)).or_default() += 1;
        }
        let mut out = CountsMap::new(self.width);
        for (k, n) in tally {
            out.record(k, n);
        }
        out
    }
}

/// Backward sweep computing, for each gate, the measured-bit flips produced
/// by X or Z on each operand immediately after that gate.
fn fault_masks(circuit: &Circuit) -> Vec<GateFault> {
    let n = circuit.num_qubits();
    let mut mx = vec![0u32; n];
    let mut mz = vec![0u32; n];
    for (k, &q) in circuit.measured().iter().enumerate() {
        mx[q] = 1 << k;
    }
    let mut faults = Vec::with_capacity(circuit.gates().len());
    for gate in circuit.gates().iter().rev() {
        let mut ops = gate.operands();
        let a = ops.next().expect("gate has an operand");
        let b = ops.next();
        faults.push(GateFault {
            two_qubit: b.is_some(),
            masks: [mx[a], mz[a], b.map_or(0, |b| mx[b]), b.map_or(0, |b| mz[b])],
        });
        // Conjugate back through the gate: P before = G† (P after) G.
        match *gate {
            Gate::X(_) | Gate::Y(_) | Gate::Z(_) => {}
            Gate::H(q) => std::mem::swap(&mut mx[q], &mut mz[q]),
            Gate::S(q) => mx[q] ^= mz[q],
            Gate::Cnot { control, target } => {
                mx[control] ^= mx[target];
                mz[target] ^= mz[control];
            }
            Gate::Swap(a, b) => {
                mx.swap(a, b);
                mz.swap(a, b);
            }
        }
    }
    faults.reverse();
    faults
}

/// Samples `shots` terminal measurements of `circuit`.
pub fn sample(circuit: &Circuit, shots: u64, noise: Option<&NoiseModel>, seed: u64) -> Result<CountsMap> {
    sample_with_offset(circuit, shots, noise, seed, 0)
}

/// Like [`sample`], with a fixed flip pattern applied to the true outcome
/// ahead of readout (the effect of a terminal Pauli frame).
pub fn sample_with_offset(
    circuit: &Circuit,
    shots: u64,
    noise: Option<&NoiseModel>,
    seed: u64,
    offset: u32,
) -> Result<CountsMap> {
    if shots == 0 {
        return Err(crate::error::contract("shots must be at least 1"));
    }
    Ok(Sampler::new(circuit, noise)?.counts(shots, seed, offset))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcirc::Confusion;

    #[test]
    fn bitstring_roundtrip_and_order() {
        assert_eq!(format_bitstring(0b001, 3), "100");
        assert_eq!(parse_bitstring("100").unwrap(), 0b001);
        assert!(parse_bitstring("10a").is_err());
    }

    #[test]
    fn zero_state_is_deterministic() {
        let mut c = Circuit::new(1).unwrap();
        c.measure(0).unwrap();
        let counts = sample(&c, 1000, None, 7).unwrap();
        assert_eq!(counts.get_str("0").unwrap(), 1000);
        assert_eq!(counts.shots(), 1000);
    }

    #[test]
    fn forced_readout_flip() {
        let mut c = Circuit::new(1).unwrap();
        c.measure(0).unwrap();
        let noise = NoiseModel::new("flip", 0.0, 0.0, Confusion::asymmetric(1.0, 0.0)).unwrap();
        let counts = sample(&c, 500, Some(&noise), 1).unwrap();
        assert_eq!(counts.get_str("1").unwrap(), 500);
    }

    #[test]
    fn zero_shots_rejected() {
        let c = Circuit::new(1).unwrap();
        assert!(sample(&c, 0, None, 0).is_err());
    }

    #[test]
    fn fault_masks_follow_conjugation() {
        // X on qubit 0 after H(0) flips it; Z on 0 before the CNOT does not.
        let mut c = Circuit::new(2).unwrap();
        c.h(0).cx(0, 1).measure_all();
        let faults = fault_masks(&c);
        assert_eq!(faults[0].masks, [0b11, 0, 0, 0]);
        assert_eq!(faults[1].masks, [0b01, 0, 0b10, 0]);
    }

    #[test]
    fn json_shape() {
        let counts = CountsMap::from_keys(2, [0b01, 0b01, 0b10]);
        let json = serde_json::to_value(&counts).unwrap();
        assert_eq!(json["shots"], 3);
        assert_eq!(json["counts"]["10"], 2);
        assert_eq!(json["counts"]["01"], 1);
        let back: CountsMap = serde_json::from_value(json).unwrap();
        assert_eq!(back, counts);
    }

    #[test]
    fn json_rejects_inconsistent_shots() {
        let bad = r#"{"shots": 5, "counts": {"0": 2}}"#;
        assert!(serde_json::from_str::<CountsMap>(bad).is_err());
    }

    #[test]
    fn csv_has_two_columns() {
        let counts = CountsMap::from_keys(2, [0b00, 0b11, 0b11, 0b11]);
        let mut buf = Vec::new();
        counts.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "bitstring,frequency\n00,0.25000000\n11,0.75000000\n");
    }
}
