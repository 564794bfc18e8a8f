//! Authentication server: enrollment and password verification.

use std::net::{TcpListener, TcpStream};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use log::{info, warn};
use qpass_channel::handshake::server_accept;
use qpass_channel::kem::{kem_keygen, KemKeypair, KemParams};
use qpass_channel::{MsgType, Role, SecureSession};
use qpass_core::qcirc::NoiseModel;
use qpass_core::trapauth::{derive_keys, KeySet, Password, SALT_LEN};
use qpass_core::verify::{
    decide, run_pipeline, AcceptPolicy, Decision, PipelineConfig, VerificationMode, VerificationOutcome,
};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::error::{NetError, Result};
use crate::protocol::{AuthRequest, AuthResult, AuthStatus, Purpose};
use crate::store::{EnrollmentRecord, SharedStore};
use crate::token::{Claims, NonceLedger, TokenKey, TokenKind};

pub const IO_TIMEOUT: Duration = Duration::from_secs(30);

#[derive(Debug, Clone)]
pub struct AuthConfig {
    pub noise: NoiseModel,
    pub mode: VerificationMode,
    pub shots: u64,
    /// Acceptance threshold for new enrollments. Without it the threshold
    /// is 0.5 on a noiseless backend and half the measured correct-password
    /// rate otherwise.
    pub tau: Option<f64>,
    pub token_key: TokenKey,
    pub kem: KemParams,
    pub seed: Option<u64>,
}

impl AuthConfig {
    pub fn new(token_key: TokenKey) -> Self {
        Self {
            noise: NoiseModel::ideal(),
            mode: VerificationMode::PhaseOnly,
            shots: 1000,
            tau: None,
            token_key,
            kem: KemParams::DEFAULT,
            seed: None,
        }
    }
}

pub struct AuthServer {
    config: AuthConfig,
    store: SharedStore,
    keypair: Arc<KemKeypair>,
    rng: Mutex<ChaCha20Rng>,
    grants: NonceLedger,
    simulations: AtomicU64,
}

impl AuthServer {
    pub fn new(config: AuthConfig, store: SharedStore) -> Result<Self> {
        if config.shots == 0 {
            return Err(NetError::Config("shots must be at least 1".into()));
        }
        if let Some(tau) = config.tau {
            AcceptPolicy::new(tau, 1)?;
        }
        let mut rng = crate::master_rng(config.seed.map(|s| s ^ 0x6175_7468));
        let keypair = Arc::new(kem_keygen(&config.kem, rng.random())?);
        Ok(Self {
            config,
            store,
            keypair,
            rng: Mutex::new(rng),
            grants: NonceLedger::default(),
            simulations: AtomicU64::new(0),
        })
    }

    pub fn public_key_fingerprint(&self) -> [u8; 32] {
        self.keypair.public.fingerprint()
    }

    pub fn store(&self) -> &SharedStore {
        &self.store
    }

    /// Number of verification pipelines run so far.
    pub fn simulations(&self) -> u64 {
        self.simulations.load(Ordering::Relaxed)
    }

    fn session_rng(&self) -> ChaCha20Rng {
        let mut master = self.rng.lock().unwrap_or_else(|e| e.into_inner());
        ChaCha20Rng::from_seed(master.random())
    }

    /// Accepts connections forever, one thread per session.
    pub fn serve(self: Arc<Self>, listener: TcpListener) -> Result<()> {
        info!("auth server listening on {}", listener.local_addr()?);
        for stream in listener.incoming() {
            let stream = match stream {
                Ok(s) => s,
                Err(e) => {
                    warn!("accept failed: {e}");
                    continue;
                }
            };
            let server = Arc::clone(&self);
            thread::spawn(move || {
                if let Err(e) = server.handle(stream) {
                    warn!("auth session aborted: {e}");
                }
            });
        }
        Ok(())
    }

    pub fn handle(&self, mut stream: TcpStream) -> Result<()> {
        stream.set_read_timeout(Some(IO_TIMEOUT))?;
        let mut rng = self.session_rng();
        let keys = server_accept(&mut stream, Arc::clone(&self.keypair), &mut rng)?;
        let mut session = SecureSession::new(stream, &keys, Role::Server);
        let request: AuthRequest = serde_json::from_slice(&session.recv_expect(MsgType::EncPassword)?)
            .map_err(|e| NetError::Protocol(format!("bad request: {e}")))?;
        match self.process(&request, &mut rng) {
            Ok(result) => {
                info!("{} {:?}: {:?}", request.user_id, request.purpose, result.status);
                session.send(MsgType::AuthResult, &serde_json::to_vec(&result)?)?;
                Ok(())
            }
            Err(e) => {
                let _ = session.send_error(&e.to_string());
                Err(e)
            }
        }
    }

    /// Handles one decrypted request.
    pub fn process<R: RngCore>(&self, request: &AuthRequest, rng: &mut R) -> Result<AuthResult> {
        let claims = self.config.token_key.verify(&request.grant, TokenKind::Grant)?;
        if claims.user_id != request.user_id || claims.purpose != request.purpose {
            return Err(NetError::Token("grant issued for another request".into()));
        }
        self.grants.redeem(&claims.nonce)?;
        let password_bytes =
            hex::decode(&request.password).map_err(|_| NetError::Protocol("password is not hex".into()))?;

        let (status, pass_fraction, shots) = match request.purpose {
            Purpose::Enroll => (self.enroll(&request.user_id, password_bytes, rng)?, None, 0),
            Purpose::Login => self.login(&request.user_id, password_bytes, rng)?,
        };
        let ticket = self.config.token_key.sign(&Claims {
            kind: TokenKind::Ticket,
            user_id: request.user_id.clone(),
            purpose: request.purpose,
            nonce: random_nonce(rng),
            status: Some(status),
        });
        Ok(AuthResult {
            user_id: request.user_id.clone(),
            status,
            pass_fraction,
            shots,
            ticket,
        })
    }

    fn enroll<R: RngCore>(&self, user_id: &str, password: Vec<u8>, rng: &mut R) -> Result<AuthStatus> {
        if user_id.is_empty() {
            return Err(NetError::Protocol("empty user id".into()));
        }
        if self.store.get(user_id).is_some() {
            return Ok(AuthStatus::Duplicate);
        }
        let password = Password::from_bits(password.len() * 8, password)?;
        let mut salt = [0u8; SALT_LEN];
        rng.fill_bytes(&mut salt);
        let keyset = derive_keys(&password, &salt);
        let policy = self.policy_for(&keyset, rng.next_u64())?;
        match self
            .store
            .enroll(EnrollmentRecord::new(user_id.to_string(), salt, keyset, policy))
        {
            Ok(()) => Ok(AuthStatus::Enrolled),
            Err(NetError::Duplicate(_)) => Ok(AuthStatus::Duplicate),
            Err(e) => Err(e),
        }
    }

    fn policy_for(&self, keyset: &KeySet, seed: u64) -> Result<AcceptPolicy> {
        if let Some(tau) = self.config.tau {
            return Ok(AcceptPolicy::new(tau, 1)?);
        }
        let noise = &self.config.noise;
        if noise.p1 == 0.0 && noise.p2 == 0.0 && noise.readout.is_identity() && noise.readout_overrides.is_empty() {
            return Ok(AcceptPolicy::ideal());
        }
        let baseline = self.simulate(keyset, keyset, seed)?.pass_fraction;
        if baseline <= 0.0 {
            return Err(NetError::Config(format!(
                "correct password never passes on `{}`; set an explicit threshold",
                noise.name
            )));
        }
        Ok(AcceptPolicy::from_baseline(baseline, 1)?)
    }

    fn simulate(&self, stored: &KeySet, attempt: &KeySet, seed: u64) -> Result<VerificationOutcome> {
        self.simulations.fetch_add(1, Ordering::Relaxed);
        let cfg = PipelineConfig {
            mode: self.config.mode,
            noise: self.config.noise.clone(),
            shots: self.config.shots,
            seed,
        };
        Ok(run_pipeline(stored, attempt, &[], &cfg)?.outcome)
    }

    fn login<R: RngCore>(
        &self,
        user_id: &str,
        password: Vec<u8>,
        rng: &mut R,
    ) -> Result<(AuthStatus, Option<f64>, u64)> {
        let Some(record) = self.store.get(user_id) else {
            return Ok((AuthStatus::UnknownUser, None, 0));
        };
        if password.is_empty() {
            return Ok((AuthStatus::Reject, None, 0));
        }
        let attempt = derive_keys(&Password::from_bits(password.len() * 8, password)?, &record.salt);
        let outcome = self.simulate(&record.keyset, &attempt, rng.next_u64())?;
        let status = match decide(&outcome, &record.policy)? {
            Decision::Accept => AuthStatus::Accept,
            Decision::Reject => AuthStatus::Reject,
        };
        Ok((status, Some(outcome.pass_fraction), outcome.shots))
    }
}

pub(crate) fn random_nonce<R: RngCore + ?Sized>(rng: &mut R) -> String {
    let mut n = [0u8; 16];
    rng.fill_bytes(&mut n);
    hex::encode(n)
}
