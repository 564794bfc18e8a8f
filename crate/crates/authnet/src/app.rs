//! Application server: issues grants and turns tickets into redirects.

use std::net::{TcpListener, TcpStream};
use std::sync::{Arc, Mutex};
use std::thread;

use log::{info, warn};
use qpass_channel::handshake::server_accept;
use qpass_channel::kem::{kem_keygen, KemKeypair, KemParams};
use qpass_channel::{MsgType, Role, SecureSession};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::auth::{random_nonce, IO_TIMEOUT};
use crate::error::{NetError, Result};
use crate::protocol::{AppReply, AppRequest, AuthStatus};
use crate::token::{Claims, NonceLedger, TokenKey, TokenKind};

#[derive(Debug, Clone)]
pub struct AppConfig {
    /// Address handed to clients for the authentication server.
    pub auth_addr: String,
    pub token_key: TokenKey,
    pub kem: KemParams,
    pub seed: Option<u64>,
}

pub struct AppServer {
    config: AppConfig,
    keypair: Arc<KemKeypair>,
    rng: Mutex<ChaCha20Rng>,
    tickets: NonceLedger,
}

/// Where a finished flow sends the user.
pub fn location_for(user_id: &str, status: AuthStatus) -> String {
    match status {
        AuthStatus::Accept => format!("/home/{user_id}"),
        AuthStatus::Enrolled => "/login?enrolled=1".into(),
        AuthStatus::Duplicate => "/enroll?error=taken".into(),
        AuthStatus::UnknownUser => "/login?error=unknown-user".into(),
        AuthStatus::Reject => "/login?error=denied".into(),
    }
}

impl AppServer {
    pub fn new(config: AppConfig) -> Result<Self> {
        let mut rng = crate::master_rng(config.seed.map(|s| s ^ 0x0061_7070));
        let keypair = Arc::new(kem_keygen(&config.kem, rng.random())?);
        Ok(Self {
            config,
            keypair,
            rng: Mutex::new(rng),
            tickets: NonceLedger::default(),
        })
    }

    pub fn public_key_fingerprint(&self) -> [u8; 32] {
        self.keypair.public.fingerprint()
    }

    fn session_rng(&self) -> ChaCha20Rng {
        let mut master = self.rng.lock().unwrap_or_else(|e| e.into_inner());
        ChaCha20Rng::from_seed(master.random())
    }

    pub fn serve(self: Arc<Self>, listener: TcpListener) -> Result<()> {
        info!("app server listening on {}", listener.local_addr()?);
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
                    warn!("app session aborted: {e}");
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
        let request: AppRequest = serde_json::from_slice(&session.recv_expect(MsgType::Redirect)?)
            .map_err(|e| NetError::Protocol(format!("bad request: {e}")))?;
        let reply = match request {
            AppRequest::Begin { user_id, purpose } => {
                let grant = self.config.token_key.sign(&Claims {
                    kind: TokenKind::Grant,
                    user_id,
                    purpose,
                    nonce: random_nonce(&mut rng),
                    status: None,
                });
                Ok(AppReply::GoToAuth {
                    auth_addr: self.config.auth_addr.clone(),
                    grant,
                })
            }
            AppRequest::Complete { ticket } => self.redeem(&ticket),
        };
        match reply {
            Ok(reply) => Ok(session.send(MsgType::Redirect, &serde_json::to_vec(&reply)?)?),
            Err(e) => {
                let _ = session.send_error(&e.to_string());
                Err(e)
            }
        }
    }

    fn redeem(&self, ticket: &str) -> Result<AppReply> {
        let claims = self.config.token_key.verify(ticket, TokenKind::Ticket)?;
        self.tickets.redeem(&claims.nonce)?;
        let status = claims
            .status
            .ok_or_else(|| NetError::Token("ticket carries no result".into()))?;
        Ok(AppReply::Location {
            location: location_for(&claims.user_id, status),
            user_id: claims.user_id,
            status,
        })
    }
}
