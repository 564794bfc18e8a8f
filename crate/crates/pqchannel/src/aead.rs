//! AES-256-GCM with 96-bit nonces.

use aes_gcm::aead::{Aead, KeyInit, Payload};
use aes_gcm::{Aes256Gcm, Nonce};

use crate::error::{ChannelError, Result};

pub const KEY_LEN: usize = 32;
pub const NONCE_LEN: usize = 12;
pub const TAG_LEN: usize = 16;

pub fn aead_seal(key: &[u8; KEY_LEN], nonce: &[u8; NONCE_LEN], plaintext: &[u8], aad: &[u8]) -> Vec<u8> {
    let cipher = Aes256Gcm::new_from_slice(key).expect("32-byte key");
    cipher
        .encrypt(&Nonce::from(*nonce), Payload { msg: plaintext, aad })
        .expect("plaintext within GCM limits")
}

/// Returns [`ChannelError::AuthFailure`] on any tag, ciphertext or aad mismatch.
pub fn aead_open(key: &[u8; KEY_LEN], nonce: &[u8; NONCE_LEN], sealed: &[u8], aad: &[u8]) -> Result<Vec<u8>> {
    let cipher = Aes256Gcm::new_from_slice(key).expect("32-byte key");
    cipher
        .decrypt(&Nonce::from(*nonce), Payload { msg: sealed, aad })
        .map_err(|_| ChannelError::AuthFailure)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip() {
        let key = [7u8; 32];
        let nonce = [1u8; 12];
        let sealed = aead_seal(&key, &nonce, b"hunter2", b"hdr");
        assert_eq!(sealed.len(), 7 + TAG_LEN);
        assert_eq!(aead_open(&key, &nonce, &sealed, b"hdr").unwrap(), b"hunter2");
    }

    #[test]
    fn every_flip_fails() {
        let key = [9u8; 32];
        let nonce = [2u8; 12];
        let sealed = aead_seal(&key, &nonce, b"password bytes", b"aad");
        for i in 0..sealed.len() {
            let mut bad = sealed.clone();
            bad[i] ^= 0x01;
            assert!(matches!(
                aead_open(&key, &nonce, &bad, b"aad"),
                Err(ChannelError::AuthFailure)
            ));
        }
        assert!(aead_open(&key, &nonce, &sealed, b"aae").is_err());
        assert!(aead_open(&key, &[3u8; 12], &sealed, b"aad").is_err());
    }
}
