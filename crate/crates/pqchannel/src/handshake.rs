//! Three-message key exchange followed by mutual key confirmation.
//!
//! ```text
//! client                                server
//! ClientHello(nonce_c)          ->
//!                               <-      ServerKemPub(nonce_s ‖ pk)
//! ClientKemCt(ct)               ->
//!                               <-      Confirm(mac_s)
//! Confirm(mac_c)                ->
//! ```
//!
//! Both sides hash the first three encoded frames into the transcript hash
//! `th` and derive every key as `kdf(ss, th, label)`. A party accepts only
//! after checking its peer's confirmation MAC over `th`, so any change to
//! any frame aborts the run.
//!
//! The state machines never touch IO. `client_connect` and `server_accept`
//! drive them over a blocking stream.

use std::io::{Read, Write};
use std::sync::Arc;

use hmac::{Hmac, KeyInit, Mac};
use rand::{CryptoRng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};

use crate::error::{ChannelError, Result};
use crate::kdf::kdf32;
use crate::kem::{kem_decaps, kem_encaps, KemCiphertext, KemKeypair, KemPublicKey};
use crate::wire::{read_frame, write_frame, Frame, MsgType};

pub const NONCE_LEN: usize = 32;
const TRANSCRIPT_TAG: &[u8] = b"qpass/handshake/v1";

type HmacSha256 = Hmac<Sha256>;

#[derive(Clone, PartialEq, Eq)]
pub struct SessionKeys {
    pub client_to_server: [u8; 32],
    pub server_to_client: [u8; 32],
    pub transcript_hash: [u8; 32],
}

impl std::fmt::Debug for SessionKeys {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SessionKeys")
            .field("transcript_hash", &self.transcript_hash)
            .finish_non_exhaustive()
    }
}

struct Derived {
    keys: SessionKeys,
    confirm_server: [u8; 32],
    confirm_client: [u8; 32],
}

impl Derived {
    fn new(ss: &[u8], th: [u8; 32]) -> Self {
        Self {
            keys: SessionKeys {
                client_to_server: kdf32(ss, &th, b"key c2s"),
                server_to_client: kdf32(ss, &th, b"key s2c"),
                transcript_hash: th,
            },
            confirm_server: kdf32(ss, &th, b"confirm server"),
            confirm_client: kdf32(ss, &th, b"confirm client"),
        }
    }

    fn mac(key: &[u8; 32], th: &[u8; 32], label: &[u8]) -> HmacSha256 {
        let mut mac = HmacSha256::new_from_slice(key).expect("HMAC accepts any key length");
        mac.update(label);
        mac.update(th);
        mac
    }

    fn server_confirm(&self) -> Frame {
        let tag = Self::mac(&self.confirm_server, &self.keys.transcript_hash, b"server finished").finalize();
        Frame::new(MsgType::Confirm, tag.into_bytes().to_vec())
    }

    fn client_confirm(&self) -> Frame {
        let tag = Self::mac(&self.confirm_client, &self.keys.transcript_hash, b"client finished").finalize();
        Frame::new(MsgType::Confirm, tag.into_bytes().to_vec())
    }

    fn check(key: &[u8; 32], th: &[u8; 32], label: &[u8], frame: Frame) -> Result<()> {
        let tag = frame.expect(MsgType::Confirm)?;
        Self::mac(key, th, label)
            .verify_slice(&tag)
            .map_err(|_| ChannelError::ConfirmationFailed)
    }
}

fn transcript(frames: [&Frame; 3]) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(TRANSCRIPT_TAG);
    for f in frames {
        let bytes = f.encode();
        h.update((bytes.len() as u64).to_be_bytes());
        h.update(bytes);
    }
    h.finalize().into()
}

pub struct ClientHandshake {
    hello: Frame,
    rng: ChaCha20Rng,
    pinned: Option<[u8; 32]>,
}

impl ClientHandshake {
    pub fn new<R: CryptoRng + RngCore>(rng: &mut R) -> Self {
        let mut nonce = [0u8; NONCE_LEN];
        rng.fill_bytes(&mut nonce);
        let mut seed = [0u8; 32];
        rng.fill_bytes(&mut seed);
        Self {
            hello: Frame::new(MsgType::ClientHello, nonce.to_vec()),
            rng: ChaCha20Rng::from_seed(seed),
            pinned: None,
        }
    }

    /// Abort unless the server's public key has this SHA-256 fingerprint.
    pub fn with_pinned_key(mut self, fingerprint: [u8; 32]) -> Self {
        self.pinned = Some(fingerprint);
        self
    }

    pub fn hello(&self) -> Frame {
        self.hello.clone()
    }

    pub fn on_server_key(mut self, frame: Frame) -> Result<(ClientAwaitingConfirm, Frame)> {
        let server_key = frame.clone();
        let payload = frame.expect(MsgType::ServerKemPub)?;
        if payload.len() < NONCE_LEN {
            return Err(ChannelError::Malformed("server key message too short".into()));
        }
        let pk = KemPublicKey::from_bytes(&payload[NONCE_LEN..])?;
        if let Some(pin) = self.pinned {
            if pk.fingerprint() != pin {
                return Err(ChannelError::KeyMismatch);
            }
        }
        let (ct, ss) = kem_encaps(&pk, &mut self.rng);
        let ct_frame = Frame::new(MsgType::ClientKemCt, ct.to_bytes());
        let th = transcript([&self.hello, &server_key, &ct_frame]);
        let derived = Derived::new(&ss.0, th);
        Ok((ClientAwaitingConfirm { derived }, ct_frame))
    }
}

pub struct ClientAwaitingConfirm {
    derived: Derived,
}

impl ClientAwaitingConfirm {
    /// Checks the server's confirmation and returns the client's.
    pub fn on_server_confirm(self, frame: Frame) -> Result<(SessionKeys, Frame)> {
        let d = &self.derived;
        Derived::check(&d.confirm_server, &d.keys.transcript_hash, b"server finished", frame)?;
        let reply = d.client_confirm();
        Ok((self.derived.keys, reply))
    }
}

pub struct ServerHandshake {
    keypair: Arc<KemKeypair>,
    nonce: [u8; NONCE_LEN],
}

impl ServerHandshake {
    pub fn new<R: CryptoRng + RngCore>(keypair: Arc<KemKeypair>, rng: &mut R) -> Self {
        let mut nonce = [0u8; NONCE_LEN];
        rng.fill_bytes(&mut nonce);
        Self { keypair, nonce }
    }

    pub fn on_client_hello(self, frame: Frame) -> Result<(ServerAwaitingCiphertext, Frame)> {
        let hello = frame.clone();
        if frame.expect(MsgType::ClientHello)?.len() != NONCE_LEN {
            return Err(ChannelError::Malformed("client nonce has the wrong length".into()));
        }
        let mut payload = self.nonce.to_vec();
        payload.extend_from_slice(&self.keypair.public.to_bytes());
        let server_key = Frame::new(MsgType::ServerKemPub, payload);
        Ok((
            ServerAwaitingCiphertext {
                keypair: self.keypair,
                hello,
                server_key: server_key.clone(),
            },
            server_key,
        ))
    }
}

pub struct ServerAwaitingCiphertext {
    keypair: Arc<KemKeypair>,
    hello: Frame,
    server_key: Frame,
}

impl ServerAwaitingCiphertext {
    pub fn on_client_ciphertext(self, frame: Frame) -> Result<(ServerAwaitingConfirm, Frame)> {
        let ct_frame = frame.clone();
        let ct = KemCiphertext::from_bytes(self.keypair.public.params(), &frame.expect(MsgType::ClientKemCt)?)?;
        let ss = kem_decaps(&self.keypair, &ct)?;
        let th = transcript([&self.hello, &self.server_key, &ct_frame]);
        let derived = Derived::new(&ss.0, th);
        let confirm = derived.server_confirm();
        Ok((ServerAwaitingConfirm { derived }, confirm))
    }
}

pub struct ServerAwaitingConfirm {
    derived: Derived,
}

impl ServerAwaitingConfirm {
    pub fn on_client_confirm(self, frame: Frame) -> Result<SessionKeys> {
        let d = &self.derived;
        Derived::check(&d.confirm_client, &d.keys.transcript_hash, b"client finished", frame)?;
        Ok(self.derived.keys)
    }
}

fn report<S: Write, T>(stream: &mut S, result: Result<T>) -> Result<T> {
    if let Err(e) = &result {
        if !matches!(e, ChannelError::Io(_) | ChannelError::Peer(_)) {
            // best effort; the original error is what matters
            let _ = write_frame(stream, &Frame::error("handshake aborted"));
        }
    }
    result
}

/// Runs the client side over a blocking stream.
pub fn client_connect<S, R>(stream: &mut S, rng: &mut R, pinned: Option<[u8; 32]>) -> Result<SessionKeys>
where
    S: Read + Write,
    R: CryptoRng + RngCore,
{
    let mut hs = ClientHandshake::new(rng);
    if let Some(pin) = pinned {
        hs = hs.with_pinned_key(pin);
    }
    write_frame(stream, &hs.hello())?;
    let result = (|| {
        let (waiting, ct) = hs.on_server_key(read_frame(stream)?)?;
        write_frame(stream, &ct)?;
        let (keys, confirm) = waiting.on_server_confirm(read_frame(stream)?)?;
        write_frame(stream, &confirm)?;
        Ok(keys)
    })();
    report(stream, result)
}

/// Runs the server side over a blocking stream.
pub fn server_accept<S, R>(stream: &mut S, keypair: Arc<KemKeypair>, rng: &mut R) -> Result<SessionKeys>
where
    S: Read + Write,
    R: CryptoRng + RngCore,
{
    let hs = ServerHandshake::new(keypair, rng);
    let result = (|| {
        let (waiting, server_key) = hs.on_client_hello(read_frame(stream)?)?;
        write_frame(stream, &server_key)?;
        let (waiting, confirm) = waiting.on_client_ciphertext(read_frame(stream)?)?;
        write_frame(stream, &confirm)?;
        waiting.on_client_confirm(read_frame(stream)?)
    })();
    report(stream, result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kem::{kem_keygen, KemParams};

    fn server_key() -> Arc<KemKeypair> {
        Arc::new(kem_keygen(&KemParams::TOY, [11; 32]).unwrap())
    }

    #[test]
    fn honest_run_agrees() {
        let kp = server_key();
        let mut rc = ChaCha20Rng::seed_from_u64(1);
        let mut rs = ChaCha20Rng::seed_from_u64(2);
        let client = ClientHandshake::new(&mut rc).with_pinned_key(kp.public.fingerprint());
        let server = ServerHandshake::new(kp, &mut rs);
        let (server, key_msg) = server.on_client_hello(client.hello()).unwrap();
        let (client, ct) = client.on_server_key(key_msg).unwrap();
        let (server, s_confirm) = server.on_client_ciphertext(ct).unwrap();
        let (ck, c_confirm) = client.on_server_confirm(s_confirm).unwrap();
        let sk = server.on_client_confirm(c_confirm).unwrap();
        assert_eq!(ck, sk);
        assert_ne!(ck.client_to_server, ck.server_to_client);
    }

    #[test]
    fn pin_mismatch_aborts() {
        let kp = server_key();
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let client = ClientHandshake::new(&mut rng).with_pinned_key([0; 32]);
        let (_, key_msg) = ServerHandshake::new(kp, &mut rng)
            .on_client_hello(client.hello())
            .unwrap();
        assert!(matches!(client.on_server_key(key_msg), Err(ChannelError::KeyMismatch)));
    }

    #[test]
    fn out_of_order_message_is_rejected() {
        let kp = server_key();
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        let server = ServerHandshake::new(kp, &mut rng);
        let err = server
            .on_client_hello(Frame::new(MsgType::Confirm, vec![0; 32]))
            .err()
            .unwrap();
        assert!(matches!(err, ChannelError::UnexpectedMessage { .. }));
    }
}
