//! Client side of the enroll and login flows.

use std::net::TcpStream;

use qpass_channel::handshake::client_connect;
use qpass_channel::{MsgType, Role, SecureSession};
use rand_chacha::ChaCha20Rng;

use crate::auth::IO_TIMEOUT;
use crate::error::{NetError, Result};
use crate::protocol::{AppReply, AppRequest, AuthRequest, AuthResult, AuthStatus, Purpose};

#[derive(Debug, Clone, PartialEq)]
pub struct LoginOutcome {
    pub result: AuthResult,
    /// Redirect location chosen by the application server.
    pub location: String,
}

pub struct Client {
    app_addr: String,
    rng: ChaCha20Rng,
}

impl Client {
    pub fn new(app_addr: impl Into<String>, rng: ChaCha20Rng) -> Self {
        Self {
            app_addr: app_addr.into(),
            rng,
        }
    }

    fn open(&mut self, addr: &str) -> Result<SecureSession<TcpStream>> {
        let mut stream = TcpStream::connect(addr)?;
        stream.set_read_timeout(Some(IO_TIMEOUT))?;
        let keys = client_connect(&mut stream, &mut self.rng, None)?;
        Ok(SecureSession::new(stream, &keys, Role::Client))
    }

    fn call_app(&mut self, request: &AppRequest) -> Result<AppReply> {
        let addr = self.app_addr.clone();
        let mut session = self.open(&addr)?;
        session.send(MsgType::Redirect, &serde_json::to_vec(request)?)?;
        let reply = session.recv_expect(MsgType::Redirect)?;
        serde_json::from_slice(&reply).map_err(|e| NetError::Protocol(format!("bad reply: {e}")))
    }

    pub fn enroll(&mut self, user_id: &str, password: &[u8]) -> Result<LoginOutcome> {
        self.run(user_id, password, Purpose::Enroll)
    }

    pub fn login(&mut self, user_id: &str, password: &[u8]) -> Result<LoginOutcome> {
        self.run(user_id, password, Purpose::Login)
    }

    fn run(&mut self, user_id: &str, password: &[u8], purpose: Purpose) -> Result<LoginOutcome> {
        let begin = AppRequest::Begin {
            user_id: user_id.to_string(),
            purpose,
        };
        let AppReply::GoToAuth { auth_addr, grant } = self.call_app(&begin)? else {
            return Err(NetError::Protocol(
                "expected a redirect to the authentication server".into(),
            ));
        };

        let mut session = self.open(&auth_addr)?;
        let request = AuthRequest {
            user_id: user_id.to_string(),
            purpose,
            grant,
            password: hex::encode(password),
        };
        session.send(MsgType::EncPassword, &serde_json::to_vec(&request)?)?;
        let result: AuthResult = serde_json::from_slice(&session.recv_expect(MsgType::AuthResult)?)
            .map_err(|e| NetError::Protocol(format!("bad result: {e}")))?;

        let complete = AppRequest::Complete {
            ticket: result.ticket.clone(),
        };
        let AppReply::Location { location, status, .. } = self.call_app(&complete)? else {
            return Err(NetError::Protocol("expected a final location".into()));
        };
        if status != result.status {
            return Err(NetError::Protocol("application server saw a different result".into()));
        }
        Ok(LoginOutcome { result, location })
    }
}

impl LoginOutcome {
    pub fn accepted(&self) -> bool {
        self.result.status == AuthStatus::Accept
    }
}
