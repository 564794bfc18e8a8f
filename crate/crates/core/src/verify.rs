//! Verification circuits and classical post-processing.
//!
//! Six ancillas (qubits 14..20) measure the three X-type stabilizers of each
//! block. The attempt's permutation is applied by pointing the extraction
//! CNOTs at the permuted wires; the attempt's one-time pad is removed after
//! the fact by XORing its predicted effect into the measured bits.
//!
//! Key layout: in [`VerificationMode::PhaseOnly`] bit `3b + r` is row `r` of
//! block `b`. In [`VerificationMode::BitAndPhase`] bits 0..14 are the data
//! qubits and the ancillas follow at 14..20. After post-processing the data
//! bits are in logical order.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{contract, Error, Result};
use crate::qcirc::{run_ideal, Circuit, CountsMap, Gate, NoiseModel, Sampler};
use crate::steane::{self, Syndrome, Word, BLOCK_LEN, PARITY_CHECK};
use crate::trapauth::{
    naive_program, prepare_program, swap_network, KeySet, PasswordProgram, PauliFrame, Permutation, PROGRAM_QUBITS,
};

pub const NUM_ANCILLAS: usize = 6;
pub const ANCILLA_START: usize = PROGRAM_QUBITS;
pub const VERIFY_QUBITS: usize = PROGRAM_QUBITS + NUM_ANCILLAS;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VerificationMode {
    #[default]
    PhaseOnly,
    BitAndPhase,
}

impl VerificationMode {
    pub fn width(self) -> usize {
        match self {
            VerificationMode::PhaseOnly => NUM_ANCILLAS,
            VerificationMode::BitAndPhase => VERIFY_QUBITS,
        }
    }

    pub fn measured_qubits(self) -> Vec<usize> {
        match self {
            VerificationMode::PhaseOnly => (ANCILLA_START..VERIFY_QUBITS).collect(),
            VerificationMode::BitAndPhase => (0..VERIFY_QUBITS).collect(),
        }
    }

    fn ancilla_offset(self) -> usize {
        match self {
            VerificationMode::PhaseOnly => 0,
            VerificationMode::BitAndPhase => PROGRAM_QUBITS,
        }
    }
}

impl fmt::Display for VerificationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            VerificationMode::PhaseOnly => "phase-only",
            VerificationMode::BitAndPhase => "bit-and-phase",
        })
    }
}

impl FromStr for VerificationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "phase-only" | "phase" => Ok(VerificationMode::PhaseOnly),
            "bit-and-phase" | "full" => Ok(VerificationMode::BitAndPhase),
            other => Err(contract(format!(
                "unknown verification mode `{other}` (expected phase-only or bit-and-phase)"
            ))),
        }
    }
}

/// `(block, row)` pairs in the order the stabilizers are extracted.
pub const EXTRACTION_ORDER: [(usize, usize); 6] = [(0, 0), (0, 1), (0, 2), (1, 0), (1, 1), (1, 2)];

pub fn ancilla(block: usize, row: usize) -> usize {
    ANCILLA_START + 3 * block + row
}

/// Stabilizer extraction with CNOT targets relabeled by `perm`.
pub fn extraction_gates(perm: &Permutation) -> Vec<Gate> {
    extraction_gates_in_order(perm, &EXTRACTION_ORDER)
}

pub fn extraction_gates_in_order(perm: &Permutation, order: &[(usize, usize)]) -> Vec<Gate> {
    let mut gates = Vec::new();
    for &(block, row) in order {
        let a = ancilla(block, row);
        gates.push(Gate::H(a));
        for j in (0..BLOCK_LEN).filter(|j| (PARITY_CHECK[row] >> j) & 1 == 1) {
            gates.push(Gate::Cnot {
                control: a,
                target: perm.apply(BLOCK_LEN * block + j),
            });
        }
        gates.push(Gate::H(a));
    }
    gates
}

/// A program followed by its verification. Gates before `boundary` belong
/// to the password program; error injections are spliced in there.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VerificationCircuit {
    pub circuit: Circuit,
    pub boundary: usize,
    pub mode: VerificationMode,
}

impl VerificationCircuit {
    /// Copy with `gates` inserted between program and verification.
    pub fn with_injection(&self, gates: &[Gate]) -> Result<Self> {
        for g in gates {
            if g.operands().any(|q| q >= PROGRAM_QUBITS) {
                return Err(contract(format!("injection {g:?} outside the program register")));
            }
        }
        let mut circuit = self.circuit.clone();
        circuit.insert_gates(self.boundary, gates)?;
        Ok(Self {
            circuit,
            boundary: self.boundary,
            mode: self.mode,
        })
    }

    /// Measured-bit flips caused by a Pauli frame sitting at the boundary.
    pub fn offset_of(&self, frame: &PauliFrame) -> Result<u32> {
        measured_flips(&self.circuit, self.boundary, frame)
    }
}

fn measured_flips(circuit: &Circuit, from: usize, frame: &PauliFrame) -> Result<u32> {
    if frame.len() > circuit.num_qubits() {
        return Err(contract(format!(
            "{}-qubit frame on a {}-qubit circuit",
            frame.len(),
            circuit.num_qubits()
        )));
    }
    let mut f = frame.resized(circuit.num_qubits());
    for gate in &circuit.gates()[from..] {
        f.apply_gate(gate)?;
    }
    Ok(circuit
        .measured()
        .iter()
        .enumerate()
        .fold(0, |acc, (k, &q)| acc | ((f.x(q) as u32) << k)))
}

fn verification_tail(perm: &Permutation, mode: VerificationMode) -> Result<Circuit> {
    Circuit::from_parts(VERIFY_QUBITS, extraction_gates(perm), mode.measured_qubits())
}

pub fn build_verification(
    program: &PasswordProgram,
    attempt_keys: &KeySet,
    mode: VerificationMode,
) -> Result<VerificationCircuit> {
    if program.circuit.num_qubits() != PROGRAM_QUBITS {
        return Err(contract(format!(
            "password program has {} qubits, expected {PROGRAM_QUBITS}",
            program.circuit.num_qubits()
        )));
    }
    let mut circuit = program.circuit.widened(VERIFY_QUBITS)?;
    let boundary = circuit.gates().len();
    circuit.extend_gates(extraction_gates(&attempt_keys.perm))?;
    for q in mode.measured_qubits() {
        circuit.measure(q)?;
    }
    Ok(VerificationCircuit {
        circuit,
        boundary,
        mode,
    })
}

/// A verification circuit ready to sample, with the program's terminal
/// frame folded into every shot.
#[derive(Debug, Clone)]
pub struct Execution {
    sampler: Sampler,
    offset: u32,
}

impl Execution {
    pub fn new(vc: &VerificationCircuit, program_frame: &PauliFrame, noise: Option<&NoiseModel>) -> Result<Self> {
        Ok(Self {
            sampler: Sampler::new(&vc.circuit, noise)?,
            offset: vc.offset_of(program_frame)?,
        })
    }

    pub fn shots(&self, shots: u64, seed: u64) -> Vec<u32> {
        self.sampler.shots(shots, seed, self.offset)
    }

    pub fn counts(&self, shots: u64, seed: u64) -> CountsMap {
        self.sampler.counts(shots, seed, self.offset)
    }
}

pub fn execute(
    vc: &VerificationCircuit,
    program_frame: &PauliFrame,
    noise: Option<&NoiseModel>,
    shots: u64,
    seed: u64,
) -> Result<CountsMap> {
    if shots == 0 {
        return Err(contract("shots must be at least 1"));
    }
    Ok(Execution::new(vc, program_frame, noise)?.counts(shots, seed))
}

/// Post-processed view of one shot.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ShotResult {
    pub syndromes: [Syndrome; 2],
    pub words: Option<[Word; 2]>,
    pub pass: bool,
}

/// Reads syndromes and block words out of a post-processed key.
pub fn classify_processed(key: u32, mode: VerificationMode) -> ShotResult {
    let base = mode.ancilla_offset();
    let bit = |k: usize| (key >> k) & 1 == 1;
    let syndromes = [0, 1].map(|b| Syndrome::from_rows([0, 1, 2].map(|r| bit(base + 3 * b + r))));
    let words = (mode == VerificationMode::BitAndPhase)
        .then(|| [0, 1].map(|b| Word::new(((key >> (BLOCK_LEN * b)) & 0x7f) as u8).expect("7-bit mask")));
    let phase_ok = syndromes.iter().all(|s| s.is_zero());
    let words_ok = words.is_none_or(|[w1, w2]| steane::is_even_codeword(w1) && steane::is_codeword(w2));
    ShotResult {
        syndromes,
        words,
        pass: phase_ok && words_ok,
    }
}

/// Classical decryption for one attempt: the frame's predicted flips are
/// XORed out and data bits are put back in logical order.
#[derive(Debug, Clone)]
pub struct Postprocessor {
    mode: VerificationMode,
    correction: u32,
    /// Raw bit holding logical data position `l`.
    data_source: [usize; PROGRAM_QUBITS],
}

impl Postprocessor {
    /// `frame` is the attempt's pad (14 qubits) or any frame on the full
    /// 20-qubit register, located at the program/verification boundary.
    pub fn new(attempt_keys: &KeySet, frame: &PauliFrame, mode: VerificationMode) -> Result<Self> {
        let tail = verification_tail(&attempt_keys.perm, mode)?;
        Ok(Self {
            mode,
            correction: measured_flips(&tail, 0, frame)?,
            data_source: std::array::from_fn(|l| attempt_keys.perm.apply(l)),
        })
    }

    pub fn mode(&self) -> VerificationMode {
        self.mode
    }

    pub fn correction(&self) -> u32 {
        self.correction
    }

    pub fn process(&self, raw: u32) -> u32 {
        let fixed = raw ^ self.correction;
        if self.mode == VerificationMode::PhaseOnly {
            return fixed;
        }
        let ancillas = fixed & !((1 << PROGRAM_QUBITS) - 1);
        self.data_source
            .iter()
            .enumerate()
            .fold(ancillas, |acc, (l, &src)| acc | (((fixed >> src) & 1) << l))
    }

    pub fn classify(&self, raw: u32) -> ShotResult {
        classify_processed(self.process(raw), self.mode)
    }
}

/// Aggregated post-processed results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationOutcome {
    pub mode: VerificationMode,
    pub shots: u64,
    pub passes: u64,
    pub pass_fraction: f64,
    /// Histogram keyed by `"s1 s2"`, each syndrome written row 0 first.
    pub phase_syndromes: BTreeMap<String, u64>,
    /// Histogram keyed by `"w1 w2"` (BitAndPhase only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub block_words: Option<BTreeMap<String, u64>>,
    /// Post-processed keys.
    pub processed: CountsMap,
}

impl VerificationOutcome {
    pub fn pass_count(&self) -> u64 {
        self.passes
    }
}

#[derive(Debug)]
struct OutcomeBuilder {
    mode: VerificationMode,
    passes: u64,
    syndromes: BTreeMap<String, u64>,
    words: BTreeMap<String, u64>,
    processed: CountsMap,
}

impl OutcomeBuilder {
    fn new(mode: VerificationMode) -> Self {
        Self {
            mode,
            passes: 0,
            syndromes: BTreeMap::new(),
            words: BTreeMap::new(),
            processed: CountsMap::new(mode.width()),
        }
    }

    fn record(&mut self, processed: u32, pass: bool, n: u64) {
        let r = classify_processed(processed, self.mode);
        if pass {
            self.passes += n;
        }
        *self
            .syndromes
            .entry(format!("{} {}", r.syndromes[0], r.syndromes[1]))
            .or_default() += n;
        if let Some([w1, w2]) = r.words {
            *self.words.entry(format!("{w1} {w2}")).or_default() += n;
        }
        self.processed.record(processed, n);
    }

    fn finish(self) -> VerificationOutcome {
        let shots = self.processed.shots();
        VerificationOutcome {
            mode: self.mode,
            shots,
            passes: self.passes,
            pass_fraction: if shots == 0 {
                0.0
            } else {
                self.passes as f64 / shots as f64
            },
            phase_syndromes: self.syndromes,
            block_words: (self.mode == VerificationMode::BitAndPhase).then_some(self.words),
            processed: self.processed,
        }
    }
}

pub fn postprocess(
    raw: &CountsMap,
    attempt_keys: &KeySet,
    frame: &PauliFrame,
    mode: VerificationMode,
) -> Result<VerificationOutcome> {
    if raw.width() != mode.width() {
        return Err(Error::WidthMismatch {
            expected: mode.width(),
            found: raw.width(),
        });
    }
    let post = Postprocessor::new(attempt_keys, frame, mode)?;
    let mut builder = OutcomeBuilder::new(mode);
    for (key, n) in raw.iter() {
        let processed = post.process(key);
        let pass = classify_processed(processed, mode).pass;
        builder.record(processed, pass, n);
    }
    Ok(builder.finish())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Decision {
    Accept,
    Reject,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AcceptPolicy {
    pub threshold: f64,
    pub min_shots: u64,
}

impl AcceptPolicy {
    pub fn new(threshold: f64, min_shots: u64) -> Result<Self> {
        if !(threshold > 0.0 && threshold <= 1.0) {
            return Err(contract(format!("threshold {threshold} outside (0, 1]")));
        }
        Ok(Self { threshold, min_shots })
    }

    /// Policy for an ideal backend.
    pub fn ideal() -> Self {
        Self {
            threshold: 0.5,
            min_shots: 1,
        }
    }

    /// Half the correct-password pass rate measured on the noisy backend.
    pub fn from_baseline(baseline: f64, min_shots: u64) -> Result<Self> {
        Self::new(baseline / 2.0, min_shots)
    }
}

impl Default for AcceptPolicy {
    fn default() -> Self {
        Self::ideal()
    }
}

pub fn decide(outcome: &VerificationOutcome, policy: &AcceptPolicy) -> Result<Decision> {
    if outcome.shots < policy.min_shots.max(1) {
        return Err(contract(format!(
            "{} shots, policy needs at least {}",
            outcome.shots, policy.min_shots
        )));
    }
    Ok(if outcome.pass_fraction >= policy.threshold {
        Decision::Accept
    } else {
        Decision::Reject
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub mode: VerificationMode,
    pub noise: NoiseModel,
    pub shots: u64,
    pub seed: u64,
}

impl PipelineConfig {
    pub fn ideal(mode: VerificationMode, shots: u64, seed: u64) -> Self {
        Self {
            mode,
            noise: NoiseModel::ideal(),
            shots,
            seed,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PipelineRun {
    pub raw: CountsMap,
    pub outcome: VerificationOutcome,
}

/// Delegated program for `stored`, verified and decrypted with `attempt`.
pub fn run_pipeline(
    stored: &KeySet,
    attempt: &KeySet,
    injection: &[Gate],
    config: &PipelineConfig,
) -> Result<PipelineRun> {
    let (program, frame) = prepare_program(stored, true)?;
    let vc = build_verification(&program, attempt, config.mode)?.with_injection(injection)?;
    let raw = execute(&vc, &frame, Some(&config.noise), config.shots, config.seed)?;
    let outcome = postprocess(&raw, attempt, &attempt.pad_frame(), config.mode)?;
    Ok(PipelineRun { raw, outcome })
}

/// Runs one program per `(stored, attempt)` pair; a shot passes only if
/// every instance passes. Histograms describe the first instance.
pub fn run_instances(pairs: &[(KeySet, KeySet)], config: &PipelineConfig) -> Result<VerificationOutcome> {
    if pairs.is_empty() {
        return Err(contract("at least one program instance is required"));
    }
    if config.shots == 0 {
        return Err(contract("shots must be at least 1"));
    }
    let mut per_instance = Vec::with_capacity(pairs.len());
    for (i, (stored, attempt)) in pairs.iter().enumerate() {
        let (program, frame) = prepare_program(stored, true)?;
        let vc = build_verification(&program, attempt, config.mode)?;
        let exec = Execution::new(&vc, &frame, Some(&config.noise))?;
        let post = Postprocessor::new(attempt, &attempt.pad_frame(), config.mode)?;
        let seed = config.seed.wrapping_add((i as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
        per_instance.push((exec.shots(config.shots, seed), post));
    }
    let mut builder = OutcomeBuilder::new(config.mode);
    for shot in 0..config.shots as usize {
        let pass = per_instance.iter().all(|(raw, post)| post.classify(raw[shot]).pass);
        let (raw, post) = &per_instance[0];
        builder.record(post.process(raw[shot]), pass, 1);
    }
    Ok(builder.finish())
}

/// Exact distribution of post-processed keys for an ideal backend.
pub fn exact_processed_distribution(
    vc: &VerificationCircuit,
    program_frame: &PauliFrame,
    post: &Postprocessor,
) -> Result<BTreeMap<u32, f64>> {
    let offset = vc.offset_of(program_frame)?;
    let state = run_ideal(&vc.circuit)?;
    let mut dist = BTreeMap::new();
    for (key, p) in state.measurement_distribution(vc.circuit.measured())? {
        *dist.entry(post.process(key ^ offset)).or_insert(0.0) += p;
    }
    Ok(dist)
}

/// Program and verification without delegation or relabeling: explicit
/// pad, SWAP network, explicit decryption and an inverse SWAP network.
/// Its raw keys are already in post-processed layout.
pub fn naive_pipeline(stored: &KeySet, attempt: &KeySet, mode: VerificationMode) -> Result<Circuit> {
    let mut c = naive_program(stored)?.widened(VERIFY_QUBITS)?;
    c.extend_gates(attempt.pad_frame().to_gates())?;
    c.extend_gates(swap_network(&attempt.perm.inverse()))?;
    c.extend_gates(extraction_gates(&Permutation::identity(PROGRAM_QUBITS)))?;
    for q in mode.measured_qubits() {
        c.measure(q)?;
    }
    Ok(c)
}

/// Native-gate depths (SWAP = three CNOTs) of both constructions for one
/// key set. `naive_pipeline_swap_unit` counts each SWAP as a single layer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DepthReport {
    pub delegated_program: usize,
    pub delegated_pipeline: usize,
    pub naive_program: usize,
    pub naive_pipeline: usize,
    pub naive_pipeline_swap_unit: usize,
}

impl DepthReport {
    pub fn ratio(&self) -> f64 {
        self.naive_pipeline as f64 / self.delegated_pipeline as f64
    }
}

pub fn depth_report(keys: &KeySet, mode: VerificationMode) -> Result<DepthReport> {
    let (program, _) = prepare_program(keys, true)?;
    let vc = build_verification(&program, keys, mode)?;
    let naive = naive_pipeline(keys, keys, mode)?;
    Ok(DepthReport {
        delegated_program: program.circuit.native_depth(),
        delegated_pipeline: vc.circuit.native_depth(),
        naive_program: naive_program(keys)?.native_depth(),
        naive_pipeline: naive.native_depth(),
        naive_pipeline_swap_unit: naive.depth(),
    })
}
