use std::collections::HashSet;

use qpass_channel::kem::{kem_decaps, kem_encaps, kem_keygen, KemCiphertext, KemParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

#[test]
fn toy_profile_ten_thousand_roundtrips() {
    let mut rng = ChaCha20Rng::seed_from_u64(0x70_79);
    let mut failures = 0;
    for i in 0..10_000u32 {
        // fresh keypair every hundred runs
        let mut seed = [0u8; 32];
        seed[..4].copy_from_slice(&(i / 100).to_be_bytes());
        let kp = kem_keygen(&KemParams::TOY, seed).unwrap();
        let (ct, ss) = kem_encaps(&kp.public, &mut rng);
        if kem_decaps(&kp, &ct).unwrap() != ss {
            failures += 1;
        }
    }
    assert_eq!(failures, 0);
}

#[test]
fn default_profile_thousand_roundtrips() {
    let kp = kem_keygen(&KemParams::DEFAULT, [0xd5; 32]).unwrap();
    let mut rng = ChaCha20Rng::seed_from_u64(640);
    for _ in 0..1000 {
        let (ct, ss) = kem_encaps(&kp.public, &mut rng);
        assert_eq!(kem_decaps(&kp, &ct).unwrap(), ss);
    }
}

#[test]
fn thousand_public_keys_are_distinct() {
    let mut rng = ChaCha20Rng::seed_from_u64(1000);
    let keys: HashSet<Vec<u8>> = (0..1000)
        .map(|_| kem_keygen(&KemParams::TOY, rng.random()).unwrap().public.to_bytes())
        .collect();
    assert_eq!(keys.len(), 1000);
}

#[test]
fn single_bit_tamper_changes_the_secret() {
    let params = KemParams::TOY;
    let kp = kem_keygen(&params, [0x7a; 32]).unwrap();
    let mut rng = ChaCha20Rng::seed_from_u64(77);
    let mut differ = 0;
    for _ in 0..1000 {
        let (ct, ss) = kem_encaps(&kp.public, &mut rng);
        let mut bytes = ct.to_bytes();
        // stay inside the 15 coefficient bits so the ciphertext still parses
        let coeff = rng.random_range(0..bytes.len() / 2);
        let bit = rng.random_range(0..15);
        let idx = 2 * coeff + 1 - bit / 8;
        bytes[idx] ^= 1 << (bit % 8);
        let tampered = KemCiphertext::from_bytes(&params, &bytes).unwrap();
        if kem_decaps(&kp, &tampered).unwrap() != ss {
            differ += 1;
        }
    }
    assert!(differ >= 999, "{differ}/1000");
}

#[test]
fn unreduced_or_short_ciphertexts_are_protocol_errors() {
    let params = KemParams::TOY;
    let kp = kem_keygen(&params, [1; 32]).unwrap();
    let (ct, _) = kem_encaps(&kp.public, &mut ChaCha20Rng::seed_from_u64(2));
    let mut bytes = ct.to_bytes();
    assert!(KemCiphertext::from_bytes(&params, &bytes[..bytes.len() - 2]).is_err());
    bytes[0] |= 0x80;
    assert!(KemCiphertext::from_bytes(&params, &bytes).is_err());
    assert!(KemCiphertext::from_bytes(&KemParams::DEFAULT, &ct.to_bytes()).is_err());
}
