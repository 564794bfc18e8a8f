use sha2::{Digest, Sha256};

/// SHA-256 in counter mode over `counter ‖ secret ‖ transcript ‖ label`.
pub fn kdf(secret: &[u8], transcript: &[u8], label: &[u8], len: usize) -> Vec<u8> {
    let mut out = Vec::with_capacity(len.next_multiple_of(32));
    let mut counter = 1u32;
    while out.len() < len {
        let block = Sha256::new()
            .chain_update(counter.to_be_bytes())
            .chain_update(secret)
            .chain_update(transcript)
            .chain_update(label)
            .finalize();
        out.extend_from_slice(&block);
        counter += 1;
    }
    out.truncate(len);
    out
}

pub fn kdf32(secret: &[u8], transcript: &[u8], label: &[u8]) -> [u8; 32] {
    kdf(secret, transcript, label, 32)
        .try_into()
        .expect("requested 32 bytes")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels_and_lengths() {
        let a = kdf(b"s", b"t", b"c2s", 80);
        assert_eq!(a.len(), 80);
        assert_eq!(&a[..32], &kdf32(b"s", b"t", b"c2s"));
        assert_ne!(kdf32(b"s", b"t", b"c2s"), kdf32(b"s", b"t", b"s2c"));
        assert_ne!(kdf32(b"s", b"t", b"c2s"), kdf32(b"s", b"u", b"c2s"));
        // first block is SHA-256 of the framed input
        let direct: [u8; 32] = Sha256::digest([&1u32.to_be_bytes()[..], b"s", b"t", b"c2s"].concat()).into();
        assert_eq!(kdf32(b"s", b"t", b"c2s"), direct);
    }
}
