//! The challenger/evaluator correctness game and its six tests.
//!
//! Every trial draws a fresh salt, prepares the password program and runs one
//! verification. Trial seeds are SHA-256 of the master seed, test id and
//! trial index, so parallel and serial runs agree bit for bit.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{contract, Result};
use crate::qcirc::{CountsMap, Gate, NoiseModel};
use crate::trapauth::{derive_keys, KeySet, Password, PROGRAM_QUBITS, SALT_LEN};
use crate::verify::{run_pipeline, PipelineConfig, VerificationMode};

/// `p` with probability ½, otherwise a uniform `n`-bit string other than `p`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChallengeDistribution {
    point: Password,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    Point,
    Uniform,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Challenge {
    pub value: Password,
    pub branch: Branch,
}

impl ChallengeDistribution {
    pub fn new(point: Password) -> Self {
        Self { point }
    }

    pub fn bits(&self) -> usize {
        self.point.bit_len()
    }

    pub fn point(&self) -> &Password {
        &self.point
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Challenge {
        if rng.random_bool(0.5) {
            Challenge {
                value: self.point.clone(),
                branch: Branch::Point,
            }
        } else {
            Challenge {
                value: self.sample_other(rng),
                branch: Branch::Uniform,
            }
        }
    }

    /// Uniform over the `2^n - 1` strings that are not the point.
    pub fn sample_other<R: Rng + ?Sized>(&self, rng: &mut R) -> Password {
        if self.bits() == 1 {
            let flipped = self.point.as_bytes()[0] ^ 0x80;
            return Password::from_bits(1, vec![flipped]).expect("one-bit password");
        }
        loop {
            let candidate = Password::random(self.bits(), rng).expect("non-empty point");
            if candidate != self.point {
                return candidate;
            }
        }
    }
}

pub fn sample_challenge(dist: &ChallengeDistribution, seed: u64) -> Challenge {
    dist.sample(&mut ChaCha8Rng::seed_from_u64(seed))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Injection {
    None,
    PermError,
    XError,
    ZError,
    XzError,
    FromDistribution,
}

impl Injection {
    pub fn for_test(id: u8) -> Result<Self> {
        Ok(match id {
            1 => Injection::None,
            2 => Injection::PermError,
            3 => Injection::XError,
            4 => Injection::ZError,
            5 => Injection::XzError,
            6 => Injection::FromDistribution,
            other => return Err(contract(format!("test id {other} outside 1..=6"))),
        })
    }

    fn gates(self, qubit: usize) -> Vec<Gate> {
        match self {
            Injection::XError => vec![Gate::X(qubit)],
            Injection::ZError => vec![Gate::Z(qubit)],
            Injection::XzError => vec![Gate::X(qubit), Gate::Z(qubit)],
            _ => Vec::new(),
        }
    }

    fn targets_qubit(self) -> bool {
        matches!(self, Injection::XError | Injection::ZError | Injection::XzError)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestSpec {
    pub id: u8,
    pub injection: Injection,
    /// Physical wire hit by an injection; random per trial when `None`.
    pub target_qubit: Option<usize>,
    pub trials: u32,
    pub shots: u64,
    pub noise: NoiseModel,
    pub mode: VerificationMode,
}

impl TestSpec {
    /// Test `id` with 10 trials of 5000 shots.
    pub fn standard(id: u8, noise: NoiseModel, mode: VerificationMode) -> Result<Self> {
        Ok(Self {
            id,
            injection: Injection::for_test(id)?,
            target_qubit: None,
            trials: 10,
            shots: 5000,
            noise,
            mode,
        })
    }

    pub fn with_target(mut self, qubit: usize) -> Self {
        self.target_qubit = Some(qubit);
        self
    }

    pub fn with_trials(mut self, trials: u32) -> Self {
        self.trials = trials;
        self
    }

    pub fn with_shots(mut self, shots: u64) -> Self {
        self.shots = shots;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if Injection::for_test(self.id)? != self.injection {
            return Err(contract(format!(
                "test {} cannot use injection {:?}",
                self.id, self.injection
            )));
        }
        if let Some(q) = self.target_qubit {
            if !self.injection.targets_qubit() {
                return Err(contract(format!("test {} takes no target qubit", self.id)));
            }
            if q >= PROGRAM_QUBITS {
                return Err(contract(format!("target qubit {q} outside the program")));
            }
        }
        if self.trials == 0 || self.shots == 0 {
            return Err(contract("trials and shots must be positive"));
        }
        self.noise.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: u32,
    pub pass_fraction: f64,
    /// Whether the attempt was the point (true-positive column).
    pub is_point: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target_qubit: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateRecord {
    pub test: u8,
    pub tp: Option<f64>,
    pub fp: Option<f64>,
    pub trials: u32,
    pub shots: u64,
    pub noise: String,
    pub mode: VerificationMode,
    pub tp_trials: u32,
    pub fp_trials: u32,
    #[serde(skip)]
    pub per_trial: Vec<TrialRecord>,
    /// Raw and post-processed counts of the first trial.
    #[serde(skip)]
    pub raw_histogram: Option<CountsMap>,
    #[serde(skip)]
    pub processed_histogram: Option<CountsMap>,
}

impl RateRecord {
    /// Average over all trials regardless of label.
    pub fn overall_rate(&self) -> f64 {
        let sum: f64 = self.per_trial.iter().map(|t| t.pass_fraction).sum();
        sum / self.per_trial.len().max(1) as f64
    }
}

pub fn trial_seed(master: u64, test: u8, trial: u32) -> u64 {
    let digest = Sha256::new()
        .chain_update(b"qpass/trial/v1")
        .chain_update(master.to_be_bytes())
        .chain_update([test])
        .chain_update(trial.to_be_bytes())
        .finalize();
    u64::from_be_bytes(digest[..8].try_into().expect("digest is 32 bytes"))
}

struct TrialRun {
    record: TrialRecord,
    raw: CountsMap,
    processed: CountsMap,
}

fn run_trial(spec: &TestSpec, password: &Password, seed: u64, trial: u32) -> Result<TrialRun> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut salt = [0u8; SALT_LEN];
    rng.fill(&mut salt);
    let stored = derive_keys(password, &salt);

    let mut target = None;
    let mut injection = Vec::new();
    let (attempt, is_point) = match spec.injection {
        Injection::None => (stored.clone(), true),
        Injection::PermError => {
            let i = rng.random_range(0..PROGRAM_QUBITS);
            let j = (i + rng.random_range(1..PROGRAM_QUBITS)) % PROGRAM_QUBITS;
            let perm = stored.perm.transposed(i, j);
            (KeySet::new(stored.x_keys, stored.z_keys, perm, salt)?, false)
        }
        Injection::XError | Injection::ZError | Injection::XzError => {
            let q = spec.target_qubit.unwrap_or_else(|| rng.random_range(0..PROGRAM_QUBITS));
            target = Some(q);
            injection = spec.injection.gates(q);
            (stored.clone(), false)
        }
        Injection::FromDistribution => {
            let challenge = ChallengeDistribution::new(password.clone()).sample(&mut rng);
            let is_point = challenge.value == *password;
            (derive_keys(&challenge.value, &salt), is_point)
        }
    };

    let config = PipelineConfig {
        mode: spec.mode,
        noise: spec.noise.clone(),
        shots: spec.shots,
        seed: rng.random(),
    };
    let run = run_pipeline(&stored, &attempt, &injection, &config)?;
    Ok(TrialRun {
        record: TrialRecord {
            trial,
            pass_fraction: run.outcome.pass_fraction,
            is_point,
            target_qubit: target,
        },
        raw: run.raw,
        processed: run.outcome.processed,
    })
}

pub fn run_test(spec: &TestSpec, password: &Password, seed: u64) -> Result<RateRecord> {
    spec.validate()?;
    let runs = (0..spec.trials)
        .into_par_iter()
        .map(|t| run_trial(spec, password, trial_seed(seed, spec.id, t), t))
        .collect::<Result<Vec<_>>>()?;

    let mean = |point: bool| {
        let rates: Vec<f64> = runs
            .iter()
            .filter(|r| r.record.is_point == point)
            .map(|r| r.record.pass_fraction)
            .collect();
        (!rates.is_empty()).then(|| rates.iter().sum::<f64>() / rates.len() as f64)
    };
    let tp_trials = runs.iter().filter(|r| r.record.is_point).count() as u32;
    let first = runs.first();
    Ok(RateRecord {
        test: spec.id,
        tp: mean(true),
        fp: mean(false),
        trials: spec.trials,
        shots: spec.shots,
        noise: spec.noise.name.clone(),
        mode: spec.mode,
        tp_trials,
        fp_trials: spec.trials - tp_trials,
        raw_histogram: first.map(|r| r.raw.clone()),
        processed_histogram: first.map(|r| r.processed.clone()),
        per_trial: runs.into_iter().map(|r| r.record).collect(),
    })
}

/// Rows in test order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateTable {
    pub rows: Vec<RateRecord>,
}

impl RateTable {
    pub fn row(&self, test: u8) -> Option<&RateRecord> {
        self.rows.iter().find(|r| r.test == test)
    }

    pub fn write_json<W: Write>(&self, writer: W) -> Result<()> {
        serde_json::to_writer_pretty(writer, &self.rows)?;
        Ok(())
    }

    /// One line per test; empty cells where a column has no trials.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record([
            "test",
            "tp",
            "fp",
            "tp_trials",
            "fp_trials",
            "trials",
            "shots",
            "noise",
            "mode",
        ])?;
        let cell = |r: Option<f64>| r.map(|v| format!("{v:.6}")).unwrap_or_default();
        for r in &self.rows {
            w.write_record([
                r.test.to_string(),
                cell(r.tp),
                cell(r.fp),
                r.tp_trials.to_string(),
                r.fp_trials.to_string(),
                r.trials.to_string(),
                r.shots.to_string(),
                r.noise.clone(),
                r.mode.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// The six standard tests with shared settings. Test 3 runs in
/// BitAndPhase when `mode` is PhaseOnly, since an X error commutes with
/// the phase checks.
pub fn standard_suite(noise: &NoiseModel, mode: VerificationMode, trials: u32, shots: u64) -> Result<Vec<TestSpec>> {
    (1..=6)
        .map(|id| {
            let m = if id == 3 { VerificationMode::BitAndPhase } else { mode };
            Ok(TestSpec::standard(id, noise.clone(), m)?
                .with_trials(trials)
                .with_shots(shots))
        })
        .collect()
}

pub fn run_suite(specs: &[TestSpec], password: &Password, seed: u64) -> Result<RateTable> {
    let rows = specs
        .iter()
        .map(|spec| run_test(spec, password, seed))
        .collect::<Result<Vec<_>>>()?;
    Ok(RateTable { rows })
}
