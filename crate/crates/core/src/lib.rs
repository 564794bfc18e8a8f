//! Copy-protected password verification on a simulated quantum backend.
//!
//! A password program is two Steane-encoded trap blocks (`|0⟩_L` and
//! `|+⟩_L`) whose qubits are permuted and one-time padded under keys derived
//! from the password. Verification extracts the phase syndromes (and
//! optionally the data words) and decrypts them classically with the keys
//! derived from the attempted password.
//!
//! Bit ordering is fixed across the crate: qubit 0 is the leftmost character
//! of every bitstring.

pub mod error;
pub mod game;
pub mod mitigation;
pub mod qcirc;
pub mod steane;
pub mod trapauth;
pub mod verify;

pub use error::{Error, Result};
