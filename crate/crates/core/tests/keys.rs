use std::collections::HashSet;

use qpass_core::qcirc::Gate;
use qpass_core::trapauth::{derive_keys, prepare_program, Password, SALT_LEN};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn sample_keysets(n: usize, seed: u64) -> Vec<qpass_core::trapauth::KeySet> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let pw = Password::random(256, &mut rng).unwrap();
            let mut salt = [0u8; SALT_LEN];
            rng.fill(&mut salt);
            derive_keys(&pw, &salt)
        })
        .collect()
}

#[test]
fn ten_thousand_passwords_never_collide() {
    let keys = sample_keysets(10_000, 1);
    let distinct: HashSet<_> = keys.iter().map(|k| (k.x_keys, k.z_keys, k.perm.clone())).collect();
    assert_eq!(distinct.len(), keys.len());
}

#[test]
fn pad_bits_are_balanced() {
    let keys = sample_keysets(10_000, 2);
    for bit in 0..14 {
        for mask in [
            |k: &qpass_core::trapauth::KeySet| k.x_keys,
            |k: &qpass_core::trapauth::KeySet| k.z_keys,
        ] {
            let ones = keys.iter().filter(|k| (mask(k) >> bit) & 1 == 1).count();
            let mean = ones as f64 / keys.len() as f64;
            assert!((0.45..=0.55).contains(&mean), "bit {bit}: {mean}");
        }
    }
}

#[test]
fn permutations_spread_over_positions() {
    let keys = sample_keysets(14_000, 3);
    // each logical position lands on each wire about 1/14 of the time
    for q in 0..14 {
        let mut hits = [0usize; 14];
        for k in &keys {
            hits[k.perm.apply(q)] += 1;
        }
        for h in hits {
            assert!((800..=1200).contains(&h), "position {q}: {hits:?}");
        }
    }
}

#[test]
fn delegated_programs_carry_only_structure() {
    for keys in sample_keysets(200, 4) {
        let (program, frame) = prepare_program(&keys, true).unwrap();
        assert!(program.delegated);
        assert!(program
            .circuit
            .gates()
            .iter()
            .all(|g| matches!(g, Gate::H(_) | Gate::Cnot { .. })));
        assert_eq!(frame.x_mask(), keys.x_keys as u32);
        assert_eq!(frame.z_mask(), keys.z_keys as u32);
    }
}
