use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is not Hermitian (max |A - A^H| = {deviation:e})")]
    NotHermitian { deviation: f64 },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("qubit index {index} out of range for {n_qubits} qubits")]
    IndexOutOfRange { index: usize, n_qubits: usize },
    #[error("invalid density matrix: {0}")]
    InvalidDensityMatrix(String),
    #[error("probability vector does not sum to 1 (sum = {sum})")]
    NotNormalized { sum: f64 },
    #[error("q has zero support at index {index} where p > 0")]
    ZeroSupport { index: usize },
    #[error("invalid system size {size}: {reason}")]
    InvalidSize { size: usize, reason: &'static str },
    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("{n_qubits} qubits exceeds the dense limit of {limit}")]
    TooLarge { n_qubits: usize, limit: usize },
    #[error("inverse temperature must be positive, got {0}")]
    NonPositiveBeta(f64),
    #[error("temperature grid is empty or too short")]
    EmptyGrid,
    #[error("bad gate target: {0}")]
    BadTarget(String),
    #[error("slot mismatch: {0}")]
    SlotMismatch(String),
    #[error("bad system/ancilla split: {n_system} system qubits of {n_qubits}")]
    BadSplit { n_system: usize, n_qubits: usize },
    #[error("loss is not finite ({0})")]
    NonFiniteLoss(f64),
    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("checkpoint does not match: {0}")]
    CheckpointMismatch(String),
    #[error("|G_exact| below 1e-9 at test point {index}")]
    DegenerateDenominator { index: usize },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
