use thiserror::Error;

/// Errors produced by the simulator and its checkers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("qubit index {index} out of range for {num_qubits} qubits")]
    QubitOutOfRange { index: usize, num_qubits: usize },

    #[error("duplicate qubit index {0} in one gate")]
    DuplicateQubit(usize),

    #[error("register of {0} qubits exceeds the simulator cap of {max}", max = crate::statevector::MAX_QUBITS)]
    TooManyQubits(usize),

    #[error("state norm deviates from 1 by {deviation:e}")]
    NotNormalized { deviation: f64 },

    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),

    #[error("outcome has {outcome} bits but {qubits} qubits were named")]
    OutcomeLength { qubits: usize, outcome: usize },

    #[error("oracle '{name}' expects {expected} {role} qubits, got {got}")]
    OracleArity {
        name: String,
        role: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("function table: {0}")]
    Table(String),

    #[error("invalid circuit: {0}")]
    InvalidCircuit(String),

    #[error("enumeration budget exceeded: need {needed}, budget {budget}")]
    BudgetExceeded { needed: u128, budget: u128 },

    #[error("unitary does not respect the block structure: |U[{row},{col}]| = {magnitude:e}")]
    BlockViolation { row: usize, col: usize, magnitude: f64 },

    #[error("block structure B{0} does not refine B{1}")]
    RefinementViolated(usize, usize),

    #[error("block structures differ")]
    BlockStructureMismatch,

    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("conditioning event has probability zero")]
    ZeroProbabilityCondition,

    #[error("unsupported gate for exact simulation: {0}")]
    UnsupportedGate(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
