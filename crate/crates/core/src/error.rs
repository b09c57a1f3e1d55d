use thiserror::Error;

/// Errors raised by the simulation library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("qubit label `{0}` appears more than once")]
    LabelCollision(String),

    #[error("unknown qubit label `{0}`")]
    UnknownLabel(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("state is not normalized (norm {0})")]
    NotNormalized(f64),

    #[error("matrix is not Hermitian (max deviation {0:e})")]
    NotHermitian(f64),

    #[error("density matrix trace is {0}, expected 1")]
    BadTrace(f64),

    #[error("density matrix has negative eigenvalue {0:e}")]
    NotPositive(f64),

    #[error("operator is not unitary (max deviation {0:e})")]
    NotUnitary(f64),

    #[error("channel is not trace preserving (max deviation {0:e})")]
    NotTracePreserving(f64),

    #[error("expected a single-qubit input, found {0} qubits")]
    NotSingleQubit(usize),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("register of {qubits} qubits exceeds the dense limit of {limit}")]
    RegisterTooLarge { qubits: usize, limit: usize },

    #[error("correlation matrix is singular or ill-conditioned (condition number {0:e})")]
    IllConditioned(f64),

    #[error("invalid angular momentum quantum numbers: {0}")]
    AngularMomentum(String),

    #[error("serialization error: {0}")]
    Serialization(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<serde_json::Error> for Error {
    fn from(err: serde_json::Error) -> Self {
        Error::Serialization(err.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(err: csv::Error) -> Self {
        Error::Serialization(err.to_string())
    }
}
