//! JSON bodies carried inside sealed records.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Purpose {
    Enroll,
    Login,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AuthStatus {
    Accept,
    Reject,
    UnknownUser,
    Enrolled,
    Duplicate,
}

/// Client to application server, in a `Redirect` record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum AppRequest {
    Begin { user_id: String, purpose: Purpose },
    Complete { ticket: String },
}

/// Application server to client, in a `Redirect` record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AppReply {
    GoToAuth {
        auth_addr: String,
        grant: String,
    },
    Location {
        user_id: String,
        status: AuthStatus,
        location: String,
    },
}

/// Client to authentication server, in an `EncPassword` record.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
pub struct AuthRequest {
    pub user_id: String,
    pub purpose: Purpose,
    pub grant: String,
    /// Raw password bytes, hex encoded.
    pub password: String,
}

impl std::fmt::Debug for AuthRequest {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("AuthRequest")
            .field("user_id", &self.user_id)
            .field("purpose", &self.purpose)
            .finish_non_exhaustive()
    }
}

/// Authentication server to client, in an `AuthResult` record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuthResult {
    pub user_id: String,
    pub status: AuthStatus,
    /// Measured pass fraction, present when the simulator ran.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pass_fraction: Option<f64>,
    pub shots: u64,
    pub ticket: String,
}
