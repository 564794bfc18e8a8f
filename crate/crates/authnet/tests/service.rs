use std::io::{Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Instant;

use qpass_channel::kem::KemParams;
use qpass_channel::wire::MsgType;
use qpass_core::trapauth::{derive_keys, Password, SALT_LEN};
use qpass_core::verify::AcceptPolicy;
use qpass_net::protocol::{AuthRequest, Purpose};
use qpass_net::token::{Claims, TokenKind};
use qpass_net::{
    AppConfig, AppServer, AuthConfig, AuthServer, AuthStatus, Client, EnrollmentRecord, EnrollmentStore, NetError,
    SharedStore, TokenKey,
};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

struct Deployment {
    app_addr: String,
    auth: Arc<AuthServer>,
}

fn spawn<F: FnOnce(TcpListener) + Send + 'static>(f: F) -> String {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap().to_string();
    thread::spawn(move || f(listener));
    addr
}

/// Starts both servers; `auth_front` lets a test interpose on the path to
/// the authentication server.
fn deploy(store: SharedStore, auth_front: impl FnOnce(String) -> String) -> Deployment {
    let key = TokenKey::new([0x42; 32]);
    let mut auth_cfg = AuthConfig::new(key.clone());
    auth_cfg.shots = 500;
    auth_cfg.kem = KemParams::TOY;
    auth_cfg.seed = Some(1);
    let auth = Arc::new(AuthServer::new(auth_cfg, store).unwrap());
    let server = Arc::clone(&auth);
    let auth_addr = spawn(move |l| server.serve(l).unwrap());
    let app = Arc::new(
        AppServer::new(AppConfig {
            auth_addr: auth_front(auth_addr),
            token_key: key,
            kem: KemParams::TOY,
            seed: Some(2),
        })
        .unwrap(),
    );
    let app_addr = spawn(move |l| app.serve(l).unwrap());
    Deployment { app_addr, auth }
}

fn client(d: &Deployment, seed: u64) -> Client {
    Client::new(d.app_addr.clone(), ChaCha20Rng::seed_from_u64(seed))
}

#[test]
fn enroll_and_login_over_loopback() {
    let start = Instant::now();
    let d = deploy(SharedStore::default(), |a| a);
    let mut c = client(&d, 3);
    for i in 0..10 {
        let user = format!("user{i}");
        let pw = format!("correct horse {i}");
        let enrolled = c.enroll(&user, pw.as_bytes()).unwrap();
        assert_eq!(enrolled.result.status, AuthStatus::Enrolled);
        let good = c.login(&user, pw.as_bytes()).unwrap();
        assert!(good.accepted());
        assert_eq!(good.result.pass_fraction, Some(1.0));
        assert_eq!(good.location, format!("/home/{user}"));
        let bad = c.login(&user, b"wrong battery").unwrap();
        assert_eq!(bad.result.status, AuthStatus::Reject);
        assert!(bad.result.pass_fraction.unwrap() < 0.2);
        assert_eq!(bad.location, "/login?error=denied");
    }
    let again = c.enroll("user0", b"anything").unwrap();
    assert_eq!(again.result.status, AuthStatus::Duplicate);
    eprintln!("10 users in {:?}", start.elapsed());
}

#[test]
fn unknown_user_skips_the_simulator() {
    let d = deploy(SharedStore::default(), |a| a);
    let before = d.auth.simulations();
    let out = client(&d, 4).login("nobody", b"pw").unwrap();
    assert_eq!(out.result.status, AuthStatus::UnknownUser);
    assert_eq!(out.result.pass_fraction, None);
    assert_eq!(d.auth.simulations(), before);
}

#[test]
fn same_password_different_salts() {
    let d = deploy(SharedStore::default(), |a| a);
    let mut c = client(&d, 5);
    c.enroll("a", b"shared").unwrap();
    c.enroll("b", b"shared").unwrap();
    let store = d.auth.store();
    let (a, b) = (store.get("a").unwrap(), store.get("b").unwrap());
    assert_ne!(a.salt, b.salt);
    assert_ne!(a.keyset, b.keyset);
    assert_eq!(a.keyset, derive_keys(&Password::from_text("shared").unwrap(), &a.salt));
}

/// Forwards bytes both ways and keeps a copy of everything.
fn recording_proxy(target: String, log: Arc<Mutex<Vec<u8>>>) -> String {
    spawn(move |listener| {
        for inbound in listener.incoming() {
            let inbound = inbound.unwrap();
            let outbound = TcpStream::connect(&target).unwrap();
            for (mut from, mut to) in [
                (inbound.try_clone().unwrap(), outbound.try_clone().unwrap()),
                (outbound, inbound),
            ] {
                let log = Arc::clone(&log);
                thread::spawn(move || {
                    let mut buf = [0u8; 4096];
                    while let Ok(n) = from.read(&mut buf) {
                        if n == 0 || to.write_all(&buf[..n]).is_err() {
                            break;
                        }
                        log.lock().unwrap().extend_from_slice(&buf[..n]);
                    }
                    let _ = to.shutdown(std::net::Shutdown::Write);
                });
            }
        }
    })
}

#[test]
fn password_never_crosses_the_wire_in_clear() {
    let log = Arc::new(Mutex::new(Vec::new()));
    let tap = Arc::clone(&log);
    let d = deploy(SharedStore::default(), move |auth| recording_proxy(auth, tap));
    let secret = b"plaintext-canary-7731";
    let mut c = client(&d, 6);
    c.enroll("carol", secret).unwrap();
    assert!(c.login("carol", secret).unwrap().accepted());

    let captured = log.lock().unwrap().clone();
    assert!(!captured.is_empty());
    let hex_secret = hex::encode(secret);
    for needle in [&secret[..], hex_secret.as_bytes()] {
        assert!(!captured.windows(needle.len()).any(|w| w == needle));
    }
    // the capture parses as frames; password requests are sealed records
    let mut cursor = std::io::Cursor::new(&captured);
    let mut kinds = Vec::new();
    while (cursor.position() as usize) < captured.len() {
        kinds.push(qpass_channel::wire::read_frame(&mut cursor).unwrap().kind);
    }
    assert!(kinds.contains(&MsgType::EncPassword));
}

#[test]
fn forged_or_reused_grants_are_refused() {
    let key = TokenKey::new([0x42; 32]);
    let mut cfg = AuthConfig::new(key.clone());
    cfg.kem = KemParams::TOY;
    cfg.shots = 100;
    let auth = AuthServer::new(cfg, SharedStore::default()).unwrap();
    let mut rng = ChaCha20Rng::seed_from_u64(8);
    let grant = |signer: &TokenKey, user: &str, nonce: &str| {
        signer.sign(&Claims {
            kind: TokenKind::Grant,
            user_id: user.into(),
            purpose: Purpose::Enroll,
            nonce: nonce.into(),
            status: None,
        })
    };
    let request = |grant: String| AuthRequest {
        user_id: "erin".into(),
        purpose: Purpose::Enroll,
        grant,
        password: hex::encode(b"pw"),
    };

    let forged = request(grant(&TokenKey::new([0; 32]), "erin", "n1"));
    assert!(matches!(auth.process(&forged, &mut rng), Err(NetError::Token(_))));
    let other_user = request(grant(&key, "mallory", "n2"));
    assert!(matches!(auth.process(&other_user, &mut rng), Err(NetError::Token(_))));

    let honest = request(grant(&key, "erin", "n3"));
    assert_eq!(auth.process(&honest, &mut rng).unwrap().status, AuthStatus::Enrolled);
    assert!(matches!(auth.process(&honest, &mut rng), Err(NetError::Token(_))));
}

fn record(user: &str, salt: u8) -> EnrollmentRecord {
    let salt = [salt; SALT_LEN];
    let keys = derive_keys(&Password::from_text(user).unwrap(), &salt);
    EnrollmentRecord::new(user.into(), salt, keys, AcceptPolicy::ideal())
}

#[test]
fn concurrent_saves_leave_a_parseable_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("store.json");
    let store = SharedStore::new(EnrollmentStore::open(&path).unwrap());
    let handles: Vec<_> = (0..8)
        .map(|t| {
            let store = store.clone();
            let path = path.clone();
            thread::spawn(move || {
                for i in 0..25 {
                    store.enroll(record(&format!("t{t}-u{i}"), (t * 25 + i) as u8)).unwrap();
                    // a reader racing the writers must never see a torn file
                    EnrollmentStore::load(&path).unwrap();
                }
            })
        })
        .collect();
    for h in handles {
        h.join().unwrap();
    }
    let loaded = EnrollmentStore::load(&path).unwrap();
    assert_eq!(loaded.len(), 200);
}

#[test]
fn truncated_store_fails_to_load() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("store.json");
    let mut store = EnrollmentStore::open(&path).unwrap();
    store.insert(record("dave", 1)).unwrap();
    store.save().unwrap();
    let text = std::fs::read(&path).unwrap();
    std::fs::write(&path, &text[..text.len() / 2]).unwrap();
    let err = EnrollmentStore::load(&path).unwrap_err();
    assert!(matches!(err, NetError::CorruptStore { line, .. } if line > 0), "{err}");
}
