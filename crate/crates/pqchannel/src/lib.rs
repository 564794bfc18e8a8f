//! Post-quantum secure channel: an LWE key encapsulation in the style of
//! FrodoKEM at desk-scale parameters, AES-256-GCM for payloads, and a
//! three-message handshake with key confirmation.
//!
//! None of the profiles are wire-compatible with FrodoKEM.

pub mod aead;
pub mod error;
pub mod handshake;
pub mod kdf;
pub mod kem;
pub mod session;
pub mod wire;

pub use error::{ChannelError, Result};
pub use handshake::{ClientHandshake, ServerHandshake, SessionKeys};
pub use kem::{KemCiphertext, KemKeypair, KemParams, KemPublicKey, SharedSecret};
pub use session::{Role, SecureSession};
pub use wire::{Frame, MsgType};
