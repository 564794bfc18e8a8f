//! Signed grants (application server to authentication server) and tickets
//! (authentication server back to application server). Both are
//! `hex(json) . hex(hmac)` under a key the two servers share.

use std::collections::HashSet;
use std::sync::Mutex;

use hmac::{Hmac, KeyInit, Mac};
use serde::{Deserialize, Serialize};
use sha2::Sha256;

use crate::error::{NetError, Result};
use crate::protocol::{AuthStatus, Purpose};

type HmacSha256 = Hmac<Sha256>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TokenKind {
    Grant,
    Ticket,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Claims {
    pub kind: TokenKind,
    pub user_id: String,
    pub purpose: Purpose,
    pub nonce: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub status: Option<AuthStatus>,
}

#[derive(Clone)]
pub struct TokenKey([u8; 32]);

impl std::fmt::Debug for TokenKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("TokenKey(..)")
    }
}

impl TokenKey {
    pub fn new(key: [u8; 32]) -> Self {
        Self(key)
    }

    pub fn from_hex(text: &str) -> Result<Self> {
        let bytes = hex::decode(text.trim()).map_err(|e| NetError::Config(format!("token key: {e}")))?;
        let key = bytes
            .try_into()
            .map_err(|_| NetError::Config("token key must be 32 bytes".into()))?;
        Ok(Self(key))
    }

    fn mac(&self, body: &[u8]) -> HmacSha256 {
        let mut mac = HmacSha256::new_from_slice(&self.0).expect("HMAC accepts any key length");
        mac.update(b"qpass/token/v1");
        mac.update(body);
        mac
    }

    pub fn sign(&self, claims: &Claims) -> String {
        let body = serde_json::to_vec(claims).expect("claims serialize");
        let tag = self.mac(&body).finalize().into_bytes();
        format!("{}.{}", hex::encode(&body), hex::encode(tag))
    }

    pub fn verify(&self, token: &str, kind: TokenKind) -> Result<Claims> {
        let bad = |why: &str| NetError::Token(why.to_string());
        let (body, tag) = token.split_once('.').ok_or_else(|| bad("missing signature"))?;
        let body = hex::decode(body).map_err(|_| bad("body is not hex"))?;
        let tag = hex::decode(tag).map_err(|_| bad("signature is not hex"))?;
        self.mac(&body).verify_slice(&tag).map_err(|_| bad("bad signature"))?;
        let claims: Claims = serde_json::from_slice(&body).map_err(|_| bad("bad claims"))?;
        if claims.kind != kind {
            return Err(bad("wrong token kind"));
        }
        Ok(claims)
    }
}

/// Nonces already redeemed at one server.
#[derive(Debug, Default)]
pub struct NonceLedger(Mutex<HashSet<String>>);

impl NonceLedger {
    pub fn redeem(&self, nonce: &str) -> Result<()> {
        let mut seen = self.0.lock().unwrap_or_else(|e| e.into_inner());
        if seen.insert(nonce.to_string()) {
            Ok(())
        } else {
            Err(NetError::Token("nonce already redeemed".into()))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn claims() -> Claims {
        Claims {
            kind: TokenKind::Grant,
            user_id: "alice".into(),
            purpose: Purpose::Login,
            nonce: "00ff".into(),
            status: None,
        }
    }

    #[test]
    fn sign_verify_and_tamper() {
        let key = TokenKey::new([5; 32]);
        let token = key.sign(&claims());
        assert_eq!(key.verify(&token, TokenKind::Grant).unwrap(), claims());
        assert!(key.verify(&token, TokenKind::Ticket).is_err());
        assert!(TokenKey::new([6; 32]).verify(&token, TokenKind::Grant).is_err());
        let mut forged = token.into_bytes();
        forged[3] ^= 1;
        assert!(key
            .verify(&String::from_utf8(forged).unwrap(), TokenKind::Grant)
            .is_err());
    }

    #[test]
    fn nonces_redeem_once() {
        let ledger = NonceLedger::default();
        ledger.redeem("a").unwrap();
        assert!(ledger.redeem("a").is_err());
        ledger.redeem("b").unwrap();
    }
}
