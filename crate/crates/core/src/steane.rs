//! The [[7,1,3]] Steane code, built on the [7,4] Hamming code.
//!
//! A 7-bit [`Word`] stores position `i` in bit `i`. Column `i` of the parity
//! check matrix is the binary form of `i + 1` (most significant row first),
//! so a single flip at position `i` has syndrome value `i + 1`.
//!
//! `|0⟩_L` is the uniform superposition of the eight even-weight codewords
//! (the row space of the parity check matrix); `|1⟩_L` covers the eight
//! odd-weight codewords.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qcirc::{Circuit, Gate};

pub const BLOCK_LEN: usize = 7;

/// Parity check rows as position masks, most significant syndrome bit first.
pub const PARITY_CHECK: [u8; 3] = [0b111_1000, 0b110_0110, 0b101_0101];

/// Positions set to `|+⟩` by the encoder; each controls one generator.
const ENCODER_PIVOTS: [usize; 3] = [4, 5, 6];

/// Odd-weight codeword used to spread the input bit: positions 0, 1, 2.
const LOGICAL_X: u8 = 0b000_0111;

/// A length-7 binary word.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
pub struct Word(u8);

impl Word {
    pub fn new(bits: u8) -> Result<Self> {
        if bits >= 1 << BLOCK_LEN {
            return Err(crate::error::contract(format!(
                "word {bits:#b} is longer than {BLOCK_LEN} bits"
            )));
        }
        Ok(Self(bits))
    }

    pub fn bits(self) -> u8 {
        self.0
    }

    pub fn bit(self, position: usize) -> bool {
        (self.0 >> position) & 1 == 1
    }

    pub fn weight(self) -> u32 {
        self.0.count_ones()
    }

    pub fn all() -> impl Iterator<Item = Word> {
        (0..1u8 << BLOCK_LEN).map(Word)
    }
}

impl FromStr for Word {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.len() != BLOCK_LEN {
            return Err(Error::WidthMismatch {
                expected: BLOCK_LEN,
                found: s.len(),
            });
        }
        Word::new(crate::qcirc::parse_bitstring(s)? as u8)
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&crate::qcirc::format_bitstring(self.0 as u32, BLOCK_LEN))
    }
}

/// Three syndrome bits of one block, stored as the value `r0 r1 r2` read in
/// binary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
pub struct Syndrome(u8);

impl Syndrome {
    pub const ZERO: Syndrome = Syndrome(0);

    /// From the three measured rows, row 0 first.
    pub fn from_rows(rows: [bool; 3]) -> Self {
        Syndrome(((rows[0] as u8) << 2) | ((rows[1] as u8) << 1) | rows[2] as u8)
    }

    pub fn value(self) -> u8 {
        self.0
    }

    pub fn rows(self) -> [bool; 3] {
        [self.0 & 4 != 0, self.0 & 2 != 0, self.0 & 1 != 0]
    }

    pub fn is_zero(self) -> bool {
        self.0 == 0
    }
}

impl fmt::Display for Syndrome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for bit in self.rows() {
            f.write_str(if bit { "1" } else { "0" })?;
        }
        Ok(())
    }
}

/// `H · word mod 2`.
pub fn classical_syndrome(word: Word) -> Syndrome {
    let parity = |row: u8| (row & word.0).count_ones() % 2 == 1;
    Syndrome::from_rows(PARITY_CHECK.map(parity))
}

pub fn is_codeword(word: Word) -> bool {
    classical_syndrome(word).is_zero()
}

pub fn is_even_codeword(word: Word) -> bool {
    is_codeword(word) && word.weight().is_multiple_of(2)
}

/// The parity check matrix as 0/1 entries.
pub fn parity_check_matrix() -> [[u8; BLOCK_LEN]; 3] {
    PARITY_CHECK.map(|row| std::array::from_fn(|i| (row >> i) & 1))
}

pub fn codewords() -> Vec<Word> {
    Word::all().filter(|&w| is_codeword(w)).collect()
}

pub fn even_codewords() -> Vec<Word> {
    Word::all().filter(|&w| is_even_codeword(w)).collect()
}

/// Row-space element with a 1 at `pivot` and 0 at the other pivots.
fn pivot_generator(pivot: usize) -> u8 {
    let span = (0..8u8).map(|c| {
        PARITY_CHECK
            .iter()
            .enumerate()
            .filter(|(r, _)| (c >> r) & 1 == 1)
            .fold(0u8, |acc, (_, &row)| acc ^ row)
    });
    span.into_iter()
        .find(|&g| ENCODER_PIVOTS.iter().all(|&p| ((g >> p) & 1 == 1) == (p == pivot)))
        .expect("pivot columns of the parity check are independent")
}

/// Encoder gates for the block occupying `block_start..block_start + 7`.
///
/// Maps `|b⟩ ⊗ |0⟩^6` (input on the first qubit) to `|b⟩_L` using only
/// H and CNOT: the input is copied onto an odd codeword, the pivots are put
/// in `|+⟩`, and each pivot adds its generator.
pub fn encoder_gates(block_start: usize) -> Vec<Gate> {
    let mut gates = Vec::new();
    for i in 1..BLOCK_LEN {
        if (LOGICAL_X >> i) & 1 == 1 {
            gates.push(Gate::Cnot {
                control: block_start,
                target: block_start + i,
            });
        }
    }
    for &p in &ENCODER_PIVOTS {
        gates.push(Gate::H(block_start + p));
    }
    for &p in &ENCODER_PIVOTS {
        let generator = pivot_generator(p);
        for i in (0..BLOCK_LEN).filter(|&i| i != p && (generator >> i) & 1 == 1) {
            gates.push(Gate::Cnot {
                control: block_start + p,
                target: block_start + i,
            });
        }
    }
    gates
}

/// Encoder as a circuit fragment on a `num_qubits` register.
pub fn encoder_fragment(block_start: usize, num_qubits: usize) -> Result<Circuit> {
    if block_start + BLOCK_LEN > num_qubits {
        return Err(crate::error::contract(format!(
            "block at {block_start} does not fit in {num_qubits} qubits"
        )));
    }
    let mut circuit = Circuit::new(num_qubits)?;
    circuit.extend_gates(encoder_gates(block_start))?;
    Ok(circuit)
}
