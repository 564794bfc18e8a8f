use thiserror::Error;

use crate::qcirc::MAX_QUBITS;

#[derive(Debug, Error)]
pub enum Error {
    #[error("qubit index {index} out of range for a {num_qubits}-qubit register")]
    QubitOutOfRange { index: usize, num_qubits: usize },
    #[error("gate operands must be distinct, qubit {0} used twice")]
    DuplicateOperand(usize),
    #[error("{0} qubits exceeds the {MAX_QUBITS}-qubit simulator limit")]
    TooManyQubits(usize),
    #[error("qubit {0} is already measured")]
    DuplicateMeasurement(usize),
    #[error("invalid noise model: {0}")]
    InvalidNoise(String),
    #[error("unknown noise preset `{0}` (expected ideal, mock-device or device-like)")]
    UnknownPreset(String),
    #[error("bitstring width mismatch: expected {expected}, found {found}")]
    WidthMismatch { expected: usize, found: usize },
    #[error("invalid bitstring `{0}`")]
    InvalidBitstring(String),
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("calibration matrix is singular (condition number {condition:.3e})")]
    SingularCalibration { condition: f64 },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn contract(msg: impl Into<String>) -> Error {
    Error::Contract(msg.into())
}
