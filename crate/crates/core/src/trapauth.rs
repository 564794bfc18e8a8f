//! Password programs: key derivation, trap preparation, Steane encoding,
//! permutation by relabeling and the one-time pad as a Pauli frame.
//!
//! The key set describes the trap-code encryption of the 14 encoded qubits:
//! logical qubit `q` sits on physical wire `perm[q]`, and the pad applies
//! `X^x[w] Z^z[w]` to wire `w` after encoding. In delegated mode the pad never
//! enters the circuit and is handed back as a terminal [`PauliFrame`]; in
//! explicit mode it is pulled back through the encoder and emitted as X/Z
//! gates between trap initialization and encoding.

use std::fmt;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};

use crate::error::{contract, Result};
use crate::qcirc::{Circuit, Gate};
use crate::steane::{self, BLOCK_LEN};

pub const PROGRAM_QUBITS: usize = 2 * BLOCK_LEN;
/// Logical position of the `|0⟩` trap.
pub const TRAP_ZERO: usize = 0;
/// Logical position of the `|+⟩` trap.
pub const TRAP_PLUS: usize = BLOCK_LEN;
pub const SALT_LEN: usize = 16;

/// The point of the point function, as an `n`-bit string.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Password {
    bits: usize,
    bytes: Vec<u8>,
}

impl Password {
    /// `bytes` packed most significant bit first; bits past `bits` are cleared.
    pub fn from_bits(bits: usize, mut bytes: Vec<u8>) -> Result<Self> {
        if bits == 0 {
            return Err(contract("password must be non-empty"));
        }
        if bytes.len() != bits.div_ceil(8) {
            return Err(contract(format!(
                "{bits}-bit password needs {} bytes, got {}",
                bits.div_ceil(8),
                bytes.len()
            )));
        }
        if !bits.is_multiple_of(8) {
            let last = bytes.len() - 1;
            bytes[last] &= 0xffu8 << (8 - bits % 8);
        }
        Ok(Self { bits, bytes })
    }

    pub fn from_text(text: &str) -> Result<Self> {
        Self::from_bits(text.len() * 8, text.as_bytes().to_vec())
    }

    pub fn random<R: Rng + ?Sized>(bits: usize, rng: &mut R) -> Result<Self> {
        let mut bytes = vec![0u8; bits.div_ceil(8)];
        rng.fill(&mut bytes[..]);
        Self::from_bits(bits, bytes)
    }

    pub fn bit_len(&self) -> usize {
        self.bits
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.bytes
    }

    pub fn bit(&self, i: usize) -> bool {
        (self.bytes[i / 8] >> (7 - i % 8)) & 1 == 1
    }
}

impl fmt::Debug for Password {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Password({} bits, redacted)", self.bits)
    }
}

/// A bijection on `0..n`, mapping logical position to physical wire.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Permutation(Vec<usize>);

impl Permutation {
    pub fn new(map: Vec<usize>) -> Result<Self> {
        let mut seen = vec![false; map.len()];
        for &v in &map {
            if v >= map.len() || std::mem::replace(&mut seen[v], true) {
                return Err(contract(format!("{map:?} is not a permutation")));
            }
        }
        Ok(Self(map))
    }

    pub fn identity(n: usize) -> Self {
        Self((0..n).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn apply(&self, q: usize) -> usize {
        self.0.get(q).copied().unwrap_or(q)
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0; self.0.len()];
        for (i, &v) in self.0.iter().enumerate() {
            inv[v] = i;
        }
        Self(inv)
    }

    pub fn is_identity(&self) -> bool {
        self.0.iter().enumerate().all(|(i, &v)| i == v)
    }

    /// Swaps the images of `i` and `j`.
    pub fn transposed(&self, i: usize, j: usize) -> Self {
        let mut map = self.0.clone();
        map.swap(i, j);
        Self(map)
    }
}

impl Serialize for Permutation {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.0.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Permutation {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        Permutation::new(Vec::deserialize(d)?).map_err(serde::de::Error::custom)
    }
}

/// One-time-pad bits and permutation derived from a password and salt.
///
/// Bit `w` of `x_keys` / `z_keys` is the pad on physical wire `w`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct KeySet {
    #[serde(with = "hex_mask")]
    pub x_keys: u16,
    #[serde(with = "hex_mask")]
    pub z_keys: u16,
    pub perm: Permutation,
    #[serde(with = "hex_salt")]
    pub salt: [u8; SALT_LEN],
}

impl KeySet {
    pub fn new(x_keys: u16, z_keys: u16, perm: Permutation, salt: [u8; SALT_LEN]) -> Result<Self> {
        if perm.len() != PROGRAM_QUBITS {
            return Err(contract(format!(
                "permutation has {} entries, expected {PROGRAM_QUBITS}",
                perm.len()
            )));
        }
        let limit = 1u16 << PROGRAM_QUBITS;
        if x_keys >= limit || z_keys >= limit {
            return Err(contract("pad keys wider than 14 bits"));
        }
        Ok(Self {
            x_keys,
            z_keys,
            perm,
            salt,
        })
    }

    /// All-zero pad with the identity permutation.
    pub fn trivial() -> Self {
        Self {
            x_keys: 0,
            z_keys: 0,
            perm: Permutation::identity(PROGRAM_QUBITS),
            salt: [0; SALT_LEN],
        }
    }

    /// The pad as a frame on the program register.
    pub fn pad_frame(&self) -> PauliFrame {
        PauliFrame::from_masks(PROGRAM_QUBITS, self.x_keys as u32, self.z_keys as u32)
    }
}

mod hex_mask {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(mask: &u16, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(mask.to_be_bytes()))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<u16, D::Error> {
        let text = String::deserialize(d)?;
        let bytes: [u8; 2] = hex::decode(&text)
            .map_err(serde::de::Error::custom)?
            .try_into()
            .map_err(|_| serde::de::Error::custom("pad mask must be 2 bytes"))?;
        Ok(u16::from_be_bytes(bytes))
    }
}

mod hex_salt {
    use serde::{Deserialize, Deserializer, Serializer};

    use super::SALT_LEN;

    pub fn serialize<S: Serializer>(salt: &[u8; SALT_LEN], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(salt))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<[u8; SALT_LEN], D::Error> {
        let text = String::deserialize(d)?;
        hex::decode(&text)
            .map_err(serde::de::Error::custom)?
            .try_into()
            .map_err(|_| serde::de::Error::custom("salt must be 16 bytes"))
    }
}

/// Derives the key set for `password` under `salt`.
///
/// SHA-256 over a domain tag, the bit length, the point and the salt: the
/// first 14 digest bits are the X pad, the next 14 the Z pad, and the
/// remaining digest bytes seed a Fisher–Yates shuffle of the permutation.
pub fn derive_keys(password: &Password, salt: &[u8; SALT_LEN]) -> KeySet {
    derive_instance_keys(password, salt, 0)
}

/// Keys for the `instance`-th independent program copy; instance 0 is
/// [`derive_keys`].
pub fn derive_instance_keys(password: &Password, salt: &[u8; SALT_LEN], instance: u32) -> KeySet {
    let mut hasher = Sha256::new();
    hasher.update(b"qpass/keyset/v1");
    hasher.update(instance.to_be_bytes());
    hasher.update((password.bits as u64).to_be_bytes());
    hasher.update(&password.bytes);
    hasher.update(salt);
    let digest: [u8; 32] = hasher.finalize().into();

    let bit = |i: usize| ((digest[i / 8] >> (7 - i % 8)) & 1) as u16;
    let x_keys = (0..PROGRAM_QUBITS).fold(0u16, |acc, q| acc | (bit(q) << q));
    let z_keys = (0..PROGRAM_QUBITS).fold(0u16, |acc, q| acc | (bit(PROGRAM_QUBITS + q) << q));

    // Bits 0..28 are spent on the pad; bytes 4.. are untouched.
    let seed: [u8; 32] = Sha256::new()
        .chain_update(b"qpass/perm/v1")
        .chain_update(&digest[4..])
        .finalize()
        .into();
    let mut map: Vec<usize> = (0..PROGRAM_QUBITS).collect();
    map.shuffle(&mut ChaCha20Rng::from_seed(seed));

    KeySet {
        x_keys,
        z_keys,
        perm: Permutation(map),
        salt: *salt,
    }
}

/// X and Z bits per qubit, tracked through Clifford gates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct PauliFrame {
    len: usize,
    x: u32,
    z: u32,
}

impl PauliFrame {
    pub fn identity(len: usize) -> Self {
        assert!(len <= 32, "frame wider than 32 qubits");
        Self { len, x: 0, z: 0 }
    }

    pub fn from_masks(len: usize, x: u32, z: u32) -> Self {
        assert!(len <= 32, "frame wider than 32 qubits");
        let keep = if len == 32 { u32::MAX } else { (1u32 << len) - 1 };
        Self {
            len,
            x: x & keep,
            z: z & keep,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn x_mask(&self) -> u32 {
        self.x
    }

    pub fn z_mask(&self) -> u32 {
        self.z
    }

    pub fn x(&self, q: usize) -> bool {
        (self.x >> q) & 1 == 1
    }

    pub fn z(&self, q: usize) -> bool {
        (self.z >> q) & 1 == 1
    }

    pub fn toggle_x(&mut self, q: usize) {
        assert!(q < self.len);
        self.x ^= 1 << q;
    }

    pub fn toggle_z(&mut self, q: usize) {
        assert!(q < self.len);
        self.z ^= 1 << q;
    }

    pub fn is_identity(&self) -> bool {
        self.x == 0 && self.z == 0
    }

    /// Same frame on a register of `len` qubits (extra qubits carry nothing).
    pub fn resized(&self, len: usize) -> Self {
        Self::from_masks(len, self.x, self.z)
    }

    pub fn combine(&self, other: &PauliFrame) -> Self {
        Self::from_masks(self.len.max(other.len), self.x ^ other.x, self.z ^ other.z)
    }

    /// Conjugates the frame through one gate: afterwards `G·P = P'·G` up to phase.
    pub fn apply_gate(&mut self, gate: &Gate) -> Result<()> {
        gate.validate(self.len)?;
        let swap_bits = |m: &mut u32, a: usize, b: usize| {
            if ((*m >> a) ^ (*m >> b)) & 1 == 1 {
                *m ^= (1 << a) | (1 << b);
            }
        };
        match *gate {
            Gate::X(_) | Gate::Y(_) | Gate::Z(_) => {}
            Gate::H(q) => {
                let (x, z) = (self.x(q), self.z(q));
                if x != z {
                    self.x ^= 1 << q;
                    self.z ^= 1 << q;
                }
            }
            Gate::S(q) => {
                if self.x(q) {
                    self.z ^= 1 << q;
                }
            }
            Gate::Cnot { control, target } => {
                if self.x(control) {
                    self.x ^= 1 << target;
                }
                if self.z(target) {
                    self.z ^= 1 << control;
                }
            }
            Gate::Swap(a, b) => {
                swap_bits(&mut self.x, a, b);
                swap_bits(&mut self.z, a, b);
            }
        }
        Ok(())
    }

    /// X then Z on every flagged qubit.
    pub fn to_gates(&self) -> Vec<Gate> {
        let mut gates = Vec::new();
        for q in 0..self.len {
            if self.x(q) {
                gates.push(Gate::X(q));
            }
            if self.z(q) {
                gates.push(Gate::Z(q));
            }
        }
        gates
    }
}

/// Pushes `initial` through the whole circuit, returning the frame `f'`
/// with `U·P(f) = P(f')·U` up to global phase.
pub fn commute_frame(circuit: &Circuit, initial: &PauliFrame) -> Result<PauliFrame> {
    if initial.len() != circuit.num_qubits() {
        return Err(contract(format!(
            "{}-qubit frame on a {}-qubit circuit",
            initial.len(),
            circuit.num_qubits()
        )));
    }
    let mut frame = *initial;
    for gate in circuit.gates() {
        frame.apply_gate(gate)?;
    }
    Ok(frame)
}

/// Relabels every operand `q` of the fragment to `perm(q)`.
pub fn remap_cnots(fragment: &Circuit, perm: &Permutation) -> Result<Circuit> {
    if perm.len() > fragment.num_qubits() {
        return Err(contract(format!(
            "{}-entry permutation on a {}-qubit fragment",
            perm.len(),
            fragment.num_qubits()
        )));
    }
    let mut out = Circuit::new(fragment.num_qubits())?;
    for gate in fragment.gates() {
        out.push(gate.map_qubits(|q| perm.apply(q)))?;
    }
    for &q in fragment.measured() {
        out.measure(perm.apply(q))?;
    }
    Ok(out)
}

/// SWAP gates moving the content of wire `q` to wire `perm(q)`.
///
/// Two layers of disjoint swaps: each cycle `c_0 → c_1 → … → c_{k-1}` is
/// the reflection `c_i ↔ c_{-i}` followed by `c_i ↔ c_{1-i}`. Native depth
/// is therefore at most six CNOT layers for any permutation.
pub fn swap_network(perm: &Permutation) -> Vec<Gate> {
    let mut first = Vec::new();
    let mut second = Vec::new();
    let mut visited = vec![false; perm.len()];
    for start in 0..perm.len() {
        if visited[start] {
            continue;
        }
        let mut cycle = vec![start];
        visited[start] = true;
        let mut next = perm.apply(start);
        while next != start {
            visited[next] = true;
            cycle.push(next);
            next = perm.apply(next);
        }
        let k = cycle.len();
        for i in 0..k {
            let a = (k - i) % k;
            if i < a {
                first.push(Gate::Swap(cycle[i], cycle[a]));
            }
            let b = (k + 1 - i) % k;
            if i < b {
                second.push(Gate::Swap(cycle[i], cycle[b]));
            }
        }
    }
    first.extend(second);
    first
}

/// Trap preparation in logical layout: `|0⟩` needs nothing, `|+⟩` one H.
pub fn trap_init_gates() -> Vec<Gate> {
    vec![Gate::H(TRAP_PLUS)]
}

/// Both encoders in logical layout.
pub fn logical_encoder() -> Result<Circuit> {
    let mut c = Circuit::new(PROGRAM_QUBITS)?;
    c.extend_gates(steane::encoder_gates(0))?;
    c.extend_gates(steane::encoder_gates(BLOCK_LEN))?;
    Ok(c)
}

/// The circuit handed to the evaluator.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PasswordProgram {
    pub circuit: Circuit,
    pub program_id: String,
    pub delegated: bool,
}

impl PasswordProgram {
    fn new(circuit: Circuit, delegated: bool) -> Self {
        let description = serde_json::to_vec(circuit.gates()).expect("gates serialize");
        let digest: [u8; 32] = Sha256::digest(&description).into();
        Self {
            circuit,
            program_id: hex::encode(&digest[..16]),
            delegated,
        }
    }
}

/// Builds the password program for `keys`.
///
/// Returns the program and the terminal frame still owed to it: the whole
/// pad in delegated mode, nothing in explicit mode.
pub fn prepare_program(keys: &KeySet, delegated: bool) -> Result<(PasswordProgram, PauliFrame)> {
    let mut init = Circuit::new(PROGRAM_QUBITS)?;
    init.extend_gates(trap_init_gates())?;
    let init = remap_cnots(&init, &keys.perm)?;
    let encode = remap_cnots(&logical_encoder()?, &keys.perm)?;

    let mut circuit = init;
    let frame = if delegated {
        circuit.extend_gates(encode.gates().iter().copied())?;
        keys.pad_frame()
    } else {
        let pulled_back = commute_frame(&encode.inverse(), &keys.pad_frame())?;
        circuit.extend_gates(pulled_back.to_gates())?;
        circuit.extend_gates(encode.gates().iter().copied())?;
        PauliFrame::identity(PROGRAM_QUBITS)
    };
    Ok((PasswordProgram::new(circuit, delegated), frame))
}

/// Program without delegation or relabeling: logical-layout encoding, a SWAP
/// network realizing the permutation, then the pad as explicit gates.
pub fn naive_program(keys: &KeySet) -> Result<Circuit> {
    let mut c = Circuit::new(PROGRAM_QUBITS)?;
    c.extend_gates(trap_init_gates())?;
    c.extend_gates(logical_encoder()?.gates().iter().copied())?;
    c.extend_gates(swap_network(&keys.perm))?;
    c.extend_gates(keys.pad_frame().to_gates())?;
    Ok(c)
}
