//! LWE key encapsulation with FrodoKEM's shape: a uniform matrix `A`
//! expanded from a seed, centered-binomial secrets and errors, 8×8 message
//! matrices carrying four bits per coefficient, and a Fujisaki–Okamoto
//! transform with implicit rejection.
//!
//! All arithmetic is modulo `q = 2^log_q`, done as wrapping `u32` and masked.

use rand::{CryptoRng, Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};

use crate::error::{ChannelError, Result};

pub const NBAR: usize = 8;
/// Message bits per coefficient of the 8×8 message matrix.
pub const B_BITS: u32 = 4;
pub const SEED_A_LEN: usize = 16;
pub const SS_LEN: usize = 32;
const MU_LEN: usize = NBAR * NBAR * B_BITS as usize / 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KemParams {
    pub name: &'static str,
    /// Wire identifier of the profile.
    pub id: u8,
    pub n: usize,
    pub q: u32,
    pub eta: u32,
}

impl KemParams {
    /// Fast profile for exhaustive tests.
    pub const TOY: KemParams = KemParams {
        name: "toy",
        id: 1,
        n: 64,
        q: 1 << 15,
        eta: 2,
    };

    /// Service profile.
    pub const DEFAULT: KemParams = KemParams {
        name: "default",
        id: 2,
        n: 640,
        q: 1 << 15,
        eta: 2,
    };

    pub fn by_id(id: u8) -> Option<KemParams> {
        [Self::TOY, Self::DEFAULT].into_iter().find(|p| p.id == id)
    }

    pub fn by_name(name: &str) -> Option<KemParams> {
        [Self::TOY, Self::DEFAULT].into_iter().find(|p| p.name == name)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.q.is_power_of_two()
            && self.q >= 1 << (B_BITS + 2)
            && self.q <= 1 << 16
            && self.n >= 1
            && (1..=8).contains(&self.eta);
        if ok {
            Ok(())
        } else {
            Err(ChannelError::Malformed(format!("invalid KEM parameters {self:?}")))
        }
    }

    fn log_q(&self) -> u32 {
        self.q.trailing_zeros()
    }

    fn mask(&self) -> u32 {
        self.q - 1
    }

    pub fn public_key_len(&self) -> usize {
        1 + SEED_A_LEN + 2 * self.n * NBAR
    }

    pub fn ciphertext_len(&self) -> usize {
        2 * (NBAR * self.n + NBAR * NBAR)
    }

    /// log2 of an upper bound on the per-encapsulation decryption failure
    /// probability.
    ///
    /// Each coefficient of the decoding error is a sum of `2n` products of
    /// two independent centered-binomial values plus one more binomial
    /// value. The terms have variance `(η/2)^2` (products) or `η/2`, and are
    /// bounded by `η^2`. Decoding fails only if the error reaches
    /// `q / 2^(B+1)`. Bernstein's inequality bounds each coefficient, and a
    /// union bound covers the 64 coefficients.
    pub fn failure_bound_log2(&self) -> f64 {
        let var_cbd = self.eta as f64 / 2.0;
        let variance = 2.0 * self.n as f64 * var_cbd * var_cbd + var_cbd;
        let bound = (self.eta * self.eta) as f64;
        let t = (self.q >> (B_BITS + 1)) as f64;
        let exponent = -(t * t / 2.0) / (variance + bound * t / 3.0);
        // P <= 64 * 2 * exp(exponent)
        (64.0f64 * 2.0).log2() + exponent / std::f64::consts::LN_2
    }
}

fn expand_a(params: &KemParams, seed_a: &[u8; SEED_A_LEN]) -> Vec<u32> {
    let seed: [u8; 32] = Sha256::new()
        .chain_update(b"qpass/kem/A")
        .chain_update([params.id])
        .chain_update(seed_a)
        .finalize()
        .into();
    let mut rng = ChaCha20Rng::from_seed(seed);
    (0..params.n * params.n)
        .map(|_| rng.next_u32() & params.mask())
        .collect()
}

fn sample_cbd<R: RngCore>(rng: &mut R, eta: u32, count: usize) -> Vec<i32> {
    (0..count)
        .map(|_| {
            let bits = rng.next_u32();
            let a = (bits & ((1 << eta) - 1)).count_ones() as i32;
            let b = ((bits >> eta) & ((1 << eta) - 1)).count_ones() as i32;
            a - b
        })
        .collect()
}

fn encode_u16s(values: &[u32], out: &mut Vec<u8>) {
    for &v in values {
        out.extend_from_slice(&(v as u16).to_be_bytes());
    }
}

fn decode_u16s(bytes: &[u8], q: u32) -> Result<Vec<u32>> {
    bytes
        .chunks_exact(2)
        .map(|c| {
            let v = u16::from_be_bytes([c[0], c[1]]) as u32;
            if v >= q {
                Err(ChannelError::Malformed(format!("coefficient {v} not reduced mod {q}")))
            } else {
                Ok(v)
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KemPublicKey {
    params: KemParams,
    seed_a: [u8; SEED_A_LEN],
    /// `B = A·S + E`, n×8 row-major.
    b: Vec<u32>,
    /// Expanded `A`, n×n row-major; derived from `seed_a`.
    a: Vec<u32>,
}

impl KemPublicKey {
    pub fn params(&self) -> &KemParams {
        &self.params
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.params.public_key_len());
        out.push(self.params.id);
        out.extend_from_slice(&self.seed_a);
        encode_u16s(&self.b, &mut out);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let params = bytes
            .first()
            .and_then(|&id| KemParams::by_id(id))
            .ok_or_else(|| ChannelError::Malformed("unknown KEM profile".into()))?;
        if bytes.len() != params.public_key_len() {
            return Err(ChannelError::Malformed(format!(
                "public key of {} bytes, expected {}",
                bytes.len(),
                params.public_key_len()
            )));
        }
        let seed_a: [u8; SEED_A_LEN] = bytes[1..1 + SEED_A_LEN].try_into().expect("length checked");
        let b = decode_u16s(&bytes[1 + SEED_A_LEN..], params.q)?;
        Ok(Self {
            a: expand_a(&params, &seed_a),
            params,
            seed_a,
            b,
        })
    }

    /// SHA-256 of the encoded key.
    pub fn fingerprint(&self) -> [u8; 32] {
        Sha256::digest(self.to_bytes()).into()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KemCiphertext {
    params: KemParams,
    /// `B' = S'·A + E'`, 8×n.
    c1: Vec<u32>,
    /// `V = S'·B + E'' + encode(μ)`, 8×8.
    c2: Vec<u32>,
}

impl KemCiphertext {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.params.ciphertext_len());
        encode_u16s(&self.c1, &mut out);
        encode_u16s(&self.c2, &mut out);
        out
    }

    pub fn from_bytes(params: &KemParams, bytes: &[u8]) -> Result<Self> {
        if bytes.len() != params.ciphertext_len() {
            return Err(ChannelError::Malformed(format!(
                "ciphertext of {} bytes, expected {}",
                bytes.len(),
                params.ciphertext_len()
            )));
        }
        let split = 2 * NBAR * params.n;
        Ok(Self {
            params: *params,
            c1: decode_u16s(&bytes[..split], params.q)?,
            c2: decode_u16s(&bytes[split..], params.q)?,
        })
    }
}

#[derive(Clone, PartialEq, Eq)]
pub struct SharedSecret(pub [u8; SS_LEN]);

impl std::fmt::Debug for SharedSecret {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("SharedSecret(..)")
    }
}

#[derive(Clone)]
pub struct KemKeypair {
    pub public: KemPublicKey,
    /// n×8 row-major.
    secret: Vec<i32>,
    /// Implicit-rejection secret.
    z: [u8; 32],
    pkh: [u8; 32],
}

impl std::fmt::Debug for KemKeypair {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("KemKeypair")
            .field("params", &self.public.params.name)
            .finish_non_exhaustive()
    }
}

impl KemKeypair {
    pub fn secret_coefficients(&self) -> &[i32] {
        &self.secret
    }
}

/// Deterministic key generation from a 32-byte seed.
pub fn kem_keygen(params: &KemParams, seed: [u8; 32]) -> Result<KemKeypair> {
    params.validate()?;
    let mut rng = ChaCha20Rng::from_seed(seed);
    let mut seed_a = [0u8; SEED_A_LEN];
    rng.fill(&mut seed_a);
    let mut z = [0u8; 32];
    rng.fill(&mut z);
    let s = sample_cbd(&mut rng, params.eta, params.n * NBAR);
    let e = sample_cbd(&mut rng, params.eta, params.n * NBAR);

    let a = expand_a(params, &seed_a);
    let n = params.n;
    let mask = params.mask();
    let mut b = vec![0u32; n * NBAR];
    for i in 0..n {
        for k in 0..NBAR {
            let mut acc = e[i * NBAR + k] as u32;
            for j in 0..n {
                acc = acc.wrapping_add(a[i * n + j].wrapping_mul(s[j * NBAR + k] as u32));
            }
            b[i * NBAR + k] = acc & mask;
        }
    }
    let public = KemPublicKey {
        params: *params,
        seed_a,
        b,
        a,
    };
    let pkh = pk_hash(&public);
    Ok(KemKeypair {
        public,
        secret: s,
        z,
        pkh,
    })
}

fn pk_hash(pk: &KemPublicKey) -> [u8; 32] {
    Sha256::new()
        .chain_update(b"qpass/kem/pkh")
        .chain_update(pk.to_bytes())
        .finalize()
        .into()
}

/// `(seed_se, k) = G(pkh ‖ μ)`.
fn derive_coins(pkh: &[u8; 32], mu: &[u8; MU_LEN]) -> ([u8; 32], [u8; 32]) {
    let g = |tag: &[u8]| -> [u8; 32] {
        Sha256::new()
            .chain_update(tag)
            .chain_update(pkh)
            .chain_update(mu)
            .finalize()
            .into()
    };
    (g(b"qpass/kem/G/se"), g(b"qpass/kem/G/k"))
}

fn final_secret(ct_bytes: &[u8], k: &[u8; 32]) -> SharedSecret {
    SharedSecret(
        Sha256::new()
            .chain_update(b"qpass/kem/ss")
            .chain_update(ct_bytes)
            .chain_update(k)
            .finalize()
            .into(),
    )
}

fn encode_message(params: &KemParams, mu: &[u8; MU_LEN]) -> Vec<u32> {
    let shift = params.log_q() - B_BITS;
    (0..NBAR * NBAR)
        .map(|i| {
            let nibble = (mu[i / 2] >> (4 * (i % 2))) & 0xf;
            (nibble as u32) << shift
        })
        .collect()
}

fn decode_message(params: &KemParams, m: &[u32]) -> [u8; MU_LEN] {
    let shift = params.log_q() - B_BITS;
    let half = 1u32 << (shift - 1);
    let mut mu = [0u8; MU_LEN];
    for (i, &c) in m.iter().enumerate() {
        let nibble = (((c + half) & params.mask()) >> shift) as u8 & 0xf;
        mu[i / 2] |= nibble << (4 * (i % 2));
    }
    mu
}

fn encrypt(pk: &KemPublicKey, mu: &[u8; MU_LEN], seed_se: [u8; 32]) -> KemCiphertext {
    let params = &pk.params;
    let (n, mask) = (params.n, params.mask());
    let mut rng = ChaCha20Rng::from_seed(seed_se);
    let s1 = sample_cbd(&mut rng, params.eta, NBAR * n);
    let e1 = sample_cbd(&mut rng, params.eta, NBAR * n);
    let e2 = sample_cbd(&mut rng, params.eta, NBAR * NBAR);

    let mut c1 = vec![0u32; NBAR * n];
    for i in 0..NBAR {
        let row = &mut c1[i * n..(i + 1) * n];
        for (r, &e) in row.iter_mut().zip(&e1[i * n..(i + 1) * n]) {
            *r = e as u32;
        }
        for k in 0..n {
            let s = s1[i * n + k] as u32;
            if s == 0 {
                continue;
            }
            let a_row = &pk.a[k * n..(k + 1) * n];
            for (r, &a) in row.iter_mut().zip(a_row) {
                *r = r.wrapping_add(s.wrapping_mul(a));
            }
        }
        for r in row.iter_mut() {
            *r &= mask;
        }
    }

    let message = encode_message(params, mu);
    let mut c2 = vec![0u32; NBAR * NBAR];
    for i in 0..NBAR {
        for j in 0..NBAR {
            let mut acc = (e2[i * NBAR + j] as u32).wrapping_add(message[i * NBAR + j]);
            for k in 0..n {
                acc = acc.wrapping_add((s1[i * n + k] as u32).wrapping_mul(pk.b[k * NBAR + j]));
            }
            c2[i * NBAR + j] = acc & mask;
        }
    }
    KemCiphertext {
        params: *params,
        c1,
        c2,
    }
}

pub fn kem_encaps<R: CryptoRng + RngCore>(pk: &KemPublicKey, rng: &mut R) -> (KemCiphertext, SharedSecret) {
    let mut mu = [0u8; MU_LEN];
    rng.fill_bytes(&mut mu);
    let (seed_se, k) = derive_coins(&pk_hash(pk), &mu);
    let ct = encrypt(pk, &mu, seed_se);
    let ss = final_secret(&ct.to_bytes(), &k);
    (ct, ss)
}

pub fn kem_decaps(keypair: &KemKeypair, ct: &KemCiphertext) -> Result<SharedSecret> {
    let params = &keypair.public.params;
    if ct.params != *params {
        return Err(ChannelError::Malformed("ciphertext for a different profile".into()));
    }
    let (n, mask) = (params.n, params.mask());
    // M = V - B'·S
    let mut m = vec![0u32; NBAR * NBAR];
    for i in 0..NBAR {
        for j in 0..NBAR {
            let mut acc = ct.c2[i * NBAR + j];
            for k in 0..n {
                acc = acc.wrapping_sub(ct.c1[i * n + k].wrapping_mul(keypair.secret[k * NBAR + j] as u32));
            }
            m[i * NBAR + j] = acc & mask;
        }
    }
    let mu = decode_message(params, &m);
    let (seed_se, k) = derive_coins(&keypair.pkh, &mu);
    let again = encrypt(&keypair.public, &mu, seed_se);
    let ct_bytes = ct.to_bytes();
    let matches = again.to_bytes() == ct_bytes;
    Ok(final_secret(&ct_bytes, if matches { &k } else { &keypair.z }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rng(seed: u64) -> ChaCha20Rng {
        ChaCha20Rng::seed_from_u64(seed)
    }

    #[test]
    fn keygen_is_deterministic() {
        let a = kem_keygen(&KemParams::TOY, [1; 32]).unwrap();
        let b = kem_keygen(&KemParams::TOY, [1; 32]).unwrap();
        assert_eq!(a.public, b.public);
        assert_eq!(a.secret, b.secret);
        assert_ne!(kem_keygen(&KemParams::TOY, [2; 32]).unwrap().public, a.public);
    }

    #[test]
    fn secrets_within_binomial_support() {
        let kp = kem_keygen(&KemParams::TOY, [3; 32]).unwrap();
        let eta = KemParams::TOY.eta as i32;
        assert!(kp.secret_coefficients().iter().all(|s| (-eta..=eta).contains(s)));
        assert_eq!(kp.secret_coefficients().len(), 64 * NBAR);
    }

    #[test]
    fn roundtrip_both_profiles() {
        for params in [KemParams::TOY, KemParams::DEFAULT] {
            let kp = kem_keygen(&params, [4; 32]).unwrap();
            let mut r = rng(5);
            for _ in 0..5 {
                let (ct, ss) = kem_encaps(&kp.public, &mut r);
                assert_eq!(ct.to_bytes().len(), params.ciphertext_len());
                assert_eq!(kem_decaps(&kp, &ct).unwrap(), ss);
            }
        }
    }

    #[test]
    fn message_codec_inverts() {
        let params = KemParams::TOY;
        let mut mu = [0u8; MU_LEN];
        rng(6).fill_bytes(&mut mu);
        let mut m = encode_message(&params, &mu);
        // tolerate noise below q / 32
        for (i, c) in m.iter_mut().enumerate() {
            let noise = if i % 2 == 0 { 1000 } else { params.q - 1000 };
            *c = (*c + noise) & params.mask();
        }
        assert_eq!(decode_message(&params, &m), mu);
    }

    #[test]
    fn encodings_roundtrip_and_reject_junk() {
        let kp = kem_keygen(&KemParams::TOY, [7; 32]).unwrap();
        let bytes = kp.public.to_bytes();
        assert_eq!(bytes.len(), KemParams::TOY.public_key_len());
        assert_eq!(KemPublicKey::from_bytes(&bytes).unwrap(), kp.public);
        assert!(KemPublicKey::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        bad[0] = 99;
        assert!(KemPublicKey::from_bytes(&bad).is_err());
        let mut unreduced = bytes;
        unreduced[1 + SEED_A_LEN] |= 0x80;
        assert!(KemPublicKey::from_bytes(&unreduced).is_err());

        let (ct, _) = kem_encaps(&kp.public, &mut rng(8));
        let ct_bytes = ct.to_bytes();
        assert_eq!(KemCiphertext::from_bytes(&KemParams::TOY, &ct_bytes).unwrap(), ct);
        assert!(KemCiphertext::from_bytes(&KemParams::TOY, &ct_bytes[1..]).is_err());
    }

    #[test]
    fn failure_bounds_are_tiny() {
        assert!(KemParams::TOY.failure_bound_log2() < -40.0);
        assert!(KemParams::DEFAULT.failure_bound_log2() < -40.0);
    }

    #[test]
    fn independent_encapsulations_differ() {
        let kp = kem_keygen(&KemParams::TOY, [9; 32]).unwrap();
        let mut r = rng(10);
        let (c1, s1) = kem_encaps(&kp.public, &mut r);
        let (c2, s2) = kem_encaps(&kp.public, &mut r);
        assert_ne!(c1, c2);
        assert_ne!(s1, s2);
    }

    #[test]
    fn profiles_lookup() {
        assert_eq!(KemParams::by_name("default"), Some(KemParams::DEFAULT));
        assert_eq!(KemParams::by_id(1), Some(KemParams::TOY));
        assert!(KemParams::by_id(0).is_none());
        let bad = KemParams {
            q: 1000,
            ..KemParams::TOY
        };
        assert!(bad.validate().is_err());
    }
}
