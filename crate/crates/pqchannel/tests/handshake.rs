use std::io::{Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::Arc;
use std::thread;

use qpass_channel::handshake::{client_connect, server_accept, ClientHandshake, ServerHandshake};
use qpass_channel::kem::{kem_keygen, KemKeypair, KemParams};
use qpass_channel::session::{Role, SecureSession};
use qpass_channel::{ChannelError, Frame, MsgType, SessionKeys};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

fn server_keypair(seed: u8) -> Arc<KemKeypair> {
    Arc::new(kem_keygen(&KemParams::TOY, [seed; 32]).unwrap())
}

/// Runs one handshake in memory. `tamper(step, frame)` may rewrite the
/// encoded bytes of each of the five messages before delivery.
fn run(
    kp: &Arc<KemKeypair>,
    mut tamper: impl FnMut(usize, Vec<u8>) -> Vec<u8>,
) -> Result<(SessionKeys, SessionKeys), ChannelError> {
    let mut rc = ChaCha20Rng::seed_from_u64(1);
    let mut rs = ChaCha20Rng::seed_from_u64(2);
    let mut deliver = |step: usize, frame: Frame| Frame::decode(&tamper(step, frame.encode()));

    let client = ClientHandshake::new(&mut rc);
    let server = ServerHandshake::new(kp.clone(), &mut rs);
    let (server, key_msg) = server.on_client_hello(deliver(0, client.hello())?)?;
    let (client, ct) = client.on_server_key(deliver(1, key_msg)?)?;
    let (server, s_confirm) = server.on_client_ciphertext(deliver(2, ct)?)?;
    let (ck, c_confirm) = client.on_server_confirm(deliver(3, s_confirm)?)?;
    let sk = server.on_client_confirm(deliver(4, c_confirm)?)?;
    Ok((ck, sk))
}

#[test]
fn honest_handshake_yields_matching_directional_keys() {
    let kp = server_keypair(1);
    let (ck, sk) = run(&kp, |_, b| b).unwrap();
    assert_eq!(ck, sk);
    assert_ne!(ck.client_to_server, ck.server_to_client);
}

#[test]
fn every_single_byte_mutation_aborts() {
    let kp = server_keypair(2);
    let mut recorded: Vec<Vec<u8>> = Vec::new();
    run(&kp, |_, b| {
        recorded.push(b.clone());
        b
    })
    .unwrap();
    assert_eq!(recorded.len(), 5);

    let mut cases = 0usize;
    let mut aborted = 0usize;
    for (step, frame) in recorded.iter().enumerate() {
        for pos in 0..frame.len() {
            for mask in [0x01u8, 0x80, 0xff] {
                cases += 1;
                let outcome = run(&kp, |s, mut b| {
                    if s == step {
                        b[pos] ^= mask;
                    }
                    b
                });
                if outcome.is_err() {
                    aborted += 1;
                }
            }
        }
    }
    assert_eq!(aborted, cases, "{} of {cases} mutations went through", cases - aborted);
}

#[test]
fn substituted_server_key_fails_client_confirmation() {
    let kp = server_keypair(3);
    let attacker = kem_keygen(&KemParams::TOY, [0xee; 32]).unwrap();
    let err = run(&kp, |step, b| {
        if step == 1 {
            let frame = Frame::decode(&b).unwrap();
            let mut payload = frame.payload[..32].to_vec();
            payload.extend(attacker.public.to_bytes());
            Frame::new(MsgType::ServerKemPub, payload).encode()
        } else {
            b
        }
    })
    .unwrap_err();
    assert!(matches!(err, ChannelError::ConfirmationFailed), "{err:?}");
}

#[test]
fn replayed_ciphertext_under_fresh_server_nonce_aborts() {
    let kp = server_keypair(4);
    let mut recorded = Vec::new();
    run(&kp, |_, b| {
        recorded.push(Frame::decode(&b).unwrap());
        b
    })
    .unwrap();

    // a new server session sees the old hello, ciphertext and confirmation
    let mut rs = ChaCha20Rng::seed_from_u64(999);
    let server = ServerHandshake::new(kp.clone(), &mut rs);
    let (server, key_msg) = server.on_client_hello(recorded[0].clone()).unwrap();
    assert_ne!(key_msg.payload[..32], recorded[1].payload[..32]);
    let (server, confirm) = server.on_client_ciphertext(recorded[2].clone()).unwrap();
    assert_ne!(confirm, recorded[3]);
    let err = server.on_client_confirm(recorded[4].clone()).unwrap_err();
    assert!(matches!(err, ChannelError::ConfirmationFailed));
}

#[test]
fn sessions_over_tcp_and_counter_enforcement() {
    let kp = server_keypair(5);
    let pin = kp.public.fingerprint();
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let server = thread::spawn(move || {
        let (mut stream, _) = listener.accept().unwrap();
        let keys = server_accept(&mut stream, kp, &mut ChaCha20Rng::seed_from_u64(6)).unwrap();
        let mut session = SecureSession::new(stream, &keys, Role::Server);
        let msg = session.recv_expect(MsgType::EncPassword).unwrap();
        session.send(MsgType::AuthResult, &msg).unwrap();
        // the replayed record must be refused
        session.recv().unwrap_err()
    });

    let mut stream = TcpStream::connect(addr).unwrap();
    let keys = client_connect(&mut stream, &mut ChaCha20Rng::seed_from_u64(7), Some(pin)).unwrap();
    let mut tap = Tap {
        inner: stream,
        sent: Vec::new(),
    };
    let mut session = SecureSession::new(&mut tap, &keys, Role::Client);
    session.send(MsgType::EncPassword, b"hunter2").unwrap();
    assert_eq!(session.recv_expect(MsgType::AuthResult).unwrap(), b"hunter2");
    let replay = tap.sent.clone();
    tap.inner.write_all(&replay).unwrap();
    assert!(!replay.windows(7).any(|w| w == b"hunter2"));
    let err = server.join().unwrap();
    assert!(matches!(err, ChannelError::Replay { expected: 1, found: 0 }), "{err:?}");
}

struct Tap {
    inner: TcpStream,
    sent: Vec<u8>,
}

impl Read for Tap {
    fn read(&mut self, buf: &mut [u8]) -> std::io::Result<usize> {
        self.inner.read(buf)
    }
}

impl Write for Tap {
    fn write(&mut self, buf: &[u8]) -> std::io::Result<usize> {
        let n = self.inner.write(buf)?;
        self.sent.extend_from_slice(&buf[..n]);
        Ok(n)
    }
    fn flush(&mut self) -> std::io::Result<()> {
        self.inner.flush()
    }
}
