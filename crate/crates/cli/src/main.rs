//! `qpass`: experiment driver and server launcher.
//!
//! Exit codes: 0 on success, 2 for usage errors, 3 for runtime failures.

mod experiments;
mod net;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use qpass_core::qcirc::NoiseModel;
use qpass_core::verify::VerificationMode;

#[derive(Parser, Debug)]
#[command(
    name = "qpass",
    version,
    about = "Copy-protected password verification on a simulated quantum backend"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one of the six standard tests and report its rates.
    RunTest {
        /// Test number, 1 to 6.
        #[arg(value_parser = clap::value_parser!(u8).range(1..=6))]
        id: u8,
        /// Physical wire for the injected error (tests 3 to 5).
        #[arg(long)]
        target: Option<usize>,
        #[command(flatten)]
        exp: ExperimentArgs,
    },
    /// Run tests 1 to 6 and write the rate table.
    RunSuite {
        #[command(flatten)]
        exp: ExperimentArgs,
    },
    /// Raw and post-processed histograms of one test's first trial.
    Histogram {
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u8).range(1..=6))]
        test: u8,
        /// Also write a readout-mitigated version of the raw histogram.
        #[arg(long)]
        mitigate: bool,
        #[command(flatten)]
        exp: ExperimentArgs,
    },
    /// Estimate the readout calibration matrix of a noise preset.
    Calibrate {
        #[arg(long, default_value = "mock-device", value_parser = parse_noise)]
        noise: NoiseModel,
        /// Calibrate the qubits measured in this mode.
        #[arg(long, default_value = "phase-only", value_parser = parse_mode)]
        mode: VerificationMode,
        #[arg(long, value_enum, default_value_t = Method::Tensored)]
        method: Method,
        #[arg(long, default_value_t = 8192)]
        shots: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Circuit depths of the delegated and naive constructions.
    DepthReport {
        /// Number of random key sets.
        #[arg(long, default_value_t = 100)]
        keysets: u32,
        #[arg(long, default_value = "phase-only", value_parser = parse_mode)]
        mode: VerificationMode,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the application server.
    ServeApp {
        #[arg(long, default_value = "127.0.0.1:7400")]
        listen: String,
        /// Address clients are redirected to for authentication.
        #[arg(long, default_value = "127.0.0.1:7401")]
        auth_addr: String,
        #[arg(long, value_enum, default_value_t = Kem::Default)]
        kem: Kem,
    },
    /// Run the authentication server.
    ServeAuth {
        #[arg(long, default_value = "127.0.0.1:7401")]
        listen: String,
        /// Enrollment store; created on first enrollment.
        #[arg(long, default_value = "enrollments.json")]
        store: PathBuf,
        #[arg(long, default_value = "ideal", value_parser = parse_noise)]
        noise: NoiseModel,
        #[arg(long, default_value = "phase-only", value_parser = parse_mode)]
        mode: VerificationMode,
        #[arg(long, default_value_t = 1000)]
        shots: u64,
        /// Acceptance threshold for new enrollments.
        #[arg(long)]
        tau: Option<f64>,
        #[arg(long, value_enum, default_value_t = Kem::Default)]
        kem: Kem,
    },
    /// Enroll or log in through the application server.
    Client {
        #[command(subcommand)]
        action: ClientAction,
    },
}

#[derive(Subcommand, Debug)]
enum ClientAction {
    /// Register a new user with a password.
    Enroll(ClientArgs),
    /// Authenticate an enrolled user.
    Login(ClientArgs),
}

#[derive(Args, Debug)]
struct ClientArgs {
    #[arg(long, default_value = "127.0.0.1:7400")]
    app_addr: String,
    #[arg(long)]
    user: String,
    /// Password on the command line (visible to other local users).
    #[arg(long, conflicts_with = "password_stdin", required_unless_present = "password_stdin")]
    password: Option<String>,
    /// Read the password from the first line of standard input.
    #[arg(long)]
    password_stdin: bool,
}

#[derive(Args, Debug, Clone)]
struct ExperimentArgs {
    #[arg(long, default_value = "ideal", value_parser = parse_noise)]
    noise: NoiseModel,
    #[arg(long, default_value_t = 5000)]
    shots: u64,
    #[arg(long, default_value_t = 10)]
    trials: u32,
    #[arg(long, default_value = "phase-only", value_parser = parse_mode)]
    mode: VerificationMode,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// The point of the point function.
    #[arg(long, default_value = "hunter2")]
    password: String,
    /// Output directory for JSON and CSV files.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum Method {
    Tensored,
    Complete,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum Kem {
    Toy,
    Default,
}

fn parse_noise(s: &str) -> Result<NoiseModel, String> {
    NoiseModel::preset(s).map_err(|e| e.to_string())
}

fn parse_mode(s: &str) -> Result<VerificationMode, String> {
    s.parse().map_err(|e: qpass_core::Error| e.to_string())
}

/// Failure classes mapped onto exit codes.
enum Failure {
    Usage(String),
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Runtime(e.into())
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::RunTest { id, target, exp } => experiments::run_test(id, target, &exp),
        Command::RunSuite { exp } => experiments::run_suite(&exp),
        Command::Histogram { test, mitigate, exp } => experiments::histogram(test, mitigate, &exp),
        Command::Calibrate {
            noise,
            mode,
            method,
            shots,
            seed,
            out,
        } => experiments::calibrate(&noise, mode, method, shots, seed, out.as_deref()),
        Command::DepthReport {
            keysets,
            mode,
            seed,
            out,
        } => experiments::depth_report(keysets, mode, seed, out.as_deref()),
        Command::ServeApp { listen, auth_addr, kem } => net::serve_app(&listen, auth_addr, kem),
        Command::ServeAuth {
            listen,
            store,
            noise,
            mode,
            shots,
            tau,
            kem,
        } => net::serve_auth(&listen, store, noise, mode, shots, tau, kem),
        Command::Client { action } => net::client(action),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(3)
        }
    }
}
