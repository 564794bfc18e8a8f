//! Record layer. Each record is sealed under the sender's directional key
//! with nonce `0^32 ‖ counter` and associated data `type ‖ counter`; the
//! payload on the wire is `counter: u64 BE ‖ ciphertext ‖ tag`.

use std::io::{Read, Write};

use crate::aead::{aead_open, aead_seal, NONCE_LEN};
use crate::error::{ChannelError, Result};
use crate::handshake::SessionKeys;
use crate::wire::{read_frame, write_frame, Frame, MsgType};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Client,
    Server,
}

fn nonce(counter: u64) -> [u8; NONCE_LEN] {
    let mut n = [0u8; NONCE_LEN];
    n[4..].copy_from_slice(&counter.to_be_bytes());
    n
}

fn aad(kind: MsgType, counter: u64) -> [u8; 9] {
    let mut a = [0u8; 9];
    a[0] = kind.code();
    a[1..].copy_from_slice(&counter.to_be_bytes());
    a
}

/// Sending half. Counters only move forward, so a nonce is never reused
/// under one key.
pub struct Sealer {
    key: [u8; 32],
    next: u64,
}

impl Sealer {
    pub fn new(key: [u8; 32]) -> Self {
        Self { key, next: 0 }
    }

    pub fn seal(&mut self, kind: MsgType, plaintext: &[u8]) -> Result<Frame> {
        self.seal_at(self.next, kind, plaintext)
    }

    /// Seals with an explicit counter; any counter already consumed is a
    /// hard error.
    pub fn seal_at(&mut self, counter: u64, kind: MsgType, plaintext: &[u8]) -> Result<Frame> {
        if counter < self.next || counter == u64::MAX {
            return Err(ChannelError::NonceReuse(counter));
        }
        self.next = counter + 1;
        let mut payload = counter.to_be_bytes().to_vec();
        payload.extend(aead_seal(&self.key, &nonce(counter), plaintext, &aad(kind, counter)));
        Ok(Frame::new(kind, payload))
    }
}

/// Receiving half. Accepts records strictly in order.
pub struct Opener {
    key: [u8; 32],
    expected: u64,
}

impl Opener {
    pub fn new(key: [u8; 32]) -> Self {
        Self { key, expected: 0 }
    }

    pub fn open(&mut self, frame: &Frame) -> Result<Vec<u8>> {
        if frame.kind == MsgType::Error {
            return Err(ChannelError::Peer(String::from_utf8_lossy(&frame.payload).into_owned()));
        }
        if frame.payload.len() < 8 {
            return Err(ChannelError::Malformed("record shorter than its counter".into()));
        }
        let counter = u64::from_be_bytes(frame.payload[..8].try_into().expect("8 bytes"));
        if counter != self.expected {
            return Err(ChannelError::Replay {
                expected: self.expected,
                found: counter,
            });
        }
        let plain = aead_open(
            &self.key,
            &nonce(counter),
            &frame.payload[8..],
            &aad(frame.kind, counter),
        )?;
        self.expected += 1;
        Ok(plain)
    }
}

pub struct SecureSession<S> {
    stream: S,
    sealer: Sealer,
    opener: Opener,
    transcript_hash: [u8; 32],
}

impl<S: Read + Write> SecureSession<S> {
    pub fn new(stream: S, keys: &SessionKeys, role: Role) -> Self {
        let (send, recv) = match role {
            Role::Client => (keys.client_to_server, keys.server_to_client),
            Role::Server => (keys.server_to_client, keys.client_to_server),
        };
        Self {
            stream,
            sealer: Sealer::new(send),
            opener: Opener::new(recv),
            transcript_hash: keys.transcript_hash,
        }
    }

    pub fn transcript_hash(&self) -> &[u8; 32] {
        &self.transcript_hash
    }

    pub fn send(&mut self, kind: MsgType, plaintext: &[u8]) -> Result<()> {
        let frame = self.sealer.seal(kind, plaintext)?;
        write_frame(&mut self.stream, &frame)
    }

    pub fn recv(&mut self) -> Result<(MsgType, Vec<u8>)> {
        let frame = read_frame(&mut self.stream)?;
        let plain = self.opener.open(&frame)?;
        Ok((frame.kind, plain))
    }

    pub fn recv_expect(&mut self, kind: MsgType) -> Result<Vec<u8>> {
        let (found, plain) = self.recv()?;
        if found != kind {
            return Err(ChannelError::UnexpectedMessage { expected: kind, found });
        }
        Ok(plain)
    }

    /// Sends an unsealed error frame; carries no secrets.
    pub fn send_error(&mut self, message: &str) -> Result<()> {
        write_frame(&mut self.stream, &Frame::error(message))
    }

    pub fn into_inner(self) -> S {
        self.stream
    }
}
