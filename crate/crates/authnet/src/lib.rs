//! Password login over the secure channel.
//!
//! The application server only hands out signed grants and turns signed
//! tickets into redirect locations. The authentication server owns the
//! enrollment store and runs verification on the simulated backend. The
//! client carries the grant to the authentication server and the ticket
//! back, so the two servers share a signing key and nothing else.

pub mod app;
pub mod auth;
pub mod client;
pub mod error;
pub mod protocol;
pub mod store;
pub mod token;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

pub use app::{AppConfig, AppServer};
pub use auth::{AuthConfig, AuthServer};
pub use client::{Client, LoginOutcome};
pub use error::{NetError, Result};
pub use protocol::{AuthResult, AuthStatus, Purpose};
pub use store::{EnrollmentRecord, EnrollmentStore, SharedStore};
pub use token::TokenKey;

/// Environment variable holding the master seed in test mode.
pub const SEED_ENV: &str = "QPASS_SEED";

/// Master seed from `QPASS_SEED`, if set. Malformed values are an error.
pub fn seed_from_env() -> Result<Option<u64>> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| NetError::Config(format!("{SEED_ENV} must be an unsigned integer, got `{v}`"))),
        Err(_) => Ok(None),
    }
}

/// Seeded generator in test mode, OS entropy otherwise.
pub fn master_rng(seed: Option<u64>) -> ChaCha20Rng {
    match seed {
        Some(s) => ChaCha20Rng::seed_from_u64(s),
        None => ChaCha20Rng::from_os_rng(),
    }
}
