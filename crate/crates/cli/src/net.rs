use std::io::BufRead;
use std::net::TcpListener;
use std::path::PathBuf;
use std::sync::Arc;

use anyhow::Context;
use log::warn;
use qpass_channel::kem::KemParams;
use qpass_core::qcirc::NoiseModel;
use qpass_core::verify::VerificationMode;
use qpass_net::{
    master_rng, seed_from_env, AppConfig, AppServer, AuthConfig, AuthServer, Client, EnrollmentStore, SharedStore,
    TokenKey,
};
use rand::Rng;
use sha2::{Digest, Sha256};

use crate::{ClientAction, Failure, Kem};

const TOKEN_KEY_ENV: &str = "QPASS_TOKEN_KEY";

fn kem_params(kem: Kem) -> KemParams {
    match kem {
        Kem::Toy => KemParams::TOY,
        Kem::Default => KemParams::DEFAULT,
    }
}

fn seed() -> Result<Option<u64>, Failure> {
    seed_from_env().map_err(|e| Failure::Usage(e.to_string()))
}

/// The key the two servers share for grants and tickets.
fn token_key(seed: Option<u64>) -> Result<TokenKey, Failure> {
    if let Ok(hex) = std::env::var(TOKEN_KEY_ENV) {
        return TokenKey::from_hex(&hex).map_err(|e| Failure::Usage(e.to_string()));
    }
    let material = match seed {
        Some(s) => format!("qpass/token-key/seed/{s}"),
        None => {
            warn!("{TOKEN_KEY_ENV} not set; using the built-in development token key");
            "qpass/token-key/development".to_string()
        }
    };
    Ok(TokenKey::new(Sha256::digest(material.as_bytes()).into()))
}

fn bind(listen: &str) -> anyhow::Result<TcpListener> {
    TcpListener::bind(listen).with_context(|| format!("binding {listen}"))
}

pub fn serve_app(listen: &str, auth_addr: String, kem: Kem) -> Result<(), Failure> {
    let seed = seed()?;
    let config = AppConfig {
        auth_addr,
        token_key: token_key(seed)?,
        kem: kem_params(kem),
        seed,
    };
    let server = Arc::new(AppServer::new(config).context("starting app server")?);
    println!(
        "app server key fingerprint {}",
        hex::encode(server.public_key_fingerprint())
    );
    let listener = bind(listen)?;
    server.serve(listener).context("serving")?;
    Ok(())
}

#[allow(clippy::too_many_arguments)]
pub fn serve_auth(
    listen: &str,
    store: PathBuf,
    noise: NoiseModel,
    mode: VerificationMode,
    shots: u64,
    tau: Option<f64>,
    kem: Kem,
) -> Result<(), Failure> {
    if shots == 0 {
        return Err(Failure::Usage("--shots must be positive".into()));
    }
    if let Some(t) = tau {
        if !(t > 0.0 && t <= 1.0) {
            return Err(Failure::Usage(format!("--tau {t} outside (0, 1]")));
        }
    }
    let seed = seed()?;
    let store = EnrollmentStore::open(&store).with_context(|| format!("opening {}", store.display()))?;
    let config = AuthConfig {
        noise,
        mode,
        shots,
        tau,
        token_key: token_key(seed)?,
        kem: kem_params(kem),
        seed,
    };
    let server = Arc::new(AuthServer::new(config, SharedStore::new(store)).context("starting auth server")?);
    println!(
        "auth server key fingerprint {}",
        hex::encode(server.public_key_fingerprint())
    );
    let listener = bind(listen)?;
    server.serve(listener).context("serving")?;
    Ok(())
}

pub fn client(action: ClientAction) -> Result<(), Failure> {
    let (args, enroll) = match action {
        ClientAction::Enroll(a) => (a, true),
        ClientAction::Login(a) => (a, false),
    };
    let password = match args.password {
        Some(p) => p,
        None => {
            let mut line = String::new();
            std::io::stdin()
                .lock()
                .read_line(&mut line)
                .context("reading password")?;
            line.trim_end_matches(['\r', '\n']).to_string()
        }
    };
    if password.is_empty() {
        return Err(Failure::Usage("empty password".into()));
    }
    let mut rng = master_rng(seed()?);
    let mut client = Client::new(args.app_addr, master_rng(Some(rng.random())));
    let outcome = if enroll {
        client.enroll(&args.user, password.as_bytes())
    } else {
        client.login(&args.user, password.as_bytes())
    }
    .context("talking to the servers")?;
    let r = &outcome.result;
    let doc = serde_json::json!({
        "user_id": r.user_id,
        "status": r.status,
        "pass_fraction": r.pass_fraction,
        "shots": r.shots,
        "location": outcome.location,
    });
    println!("{}", serde_json::to_string_pretty(&doc).context("formatting result")?);
    Ok(())
}
