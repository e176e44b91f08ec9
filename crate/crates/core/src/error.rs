use alloc::string::String;

/// Errors raised by the core routines.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("unknown label `{0}`")]
    UnknownLabel(String),
    #[error("duplicate label `{0}`")]
    DuplicateLabel(String),
    #[error("matrix is not Hermitian (deviation {deviation:e})")]
    NotHermitian { deviation: f64 },
    #[error("matrix is not unitary (deviation {deviation:e})")]
    NotUnitary { deviation: f64 },
    #[error("operator is not positive semidefinite (min eigenvalue {min_eig:e})")]
    NotPsd { min_eig: f64 },
    #[error("state is not normalized (norm {norm})")]
    NotNormalized { norm: f64 },
    #[error("unsupported layout: {0}")]
    UnsupportedLayout(String),
    #[error("index out of range: {0}")]
    OutOfRange(String),
    #[error("group {group} has zero total count")]
    EmptyGroup { group: usize },
    #[error("table incomplete: expected {expected} entries, found {found}")]
    IncompleteTable { expected: usize, found: usize },
    #[error("family mismatch: expected {expected}, found {found}")]
    FamilyMismatch {
        expected: &'static str,
        found: &'static str,
    },
    #[error("trace must be positive (got {0})")]
    NonPositiveTrace(f64),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("pair {index} neither commutes nor anticommutes")]
    NoVanishingBracket { index: usize },
    #[error("solver did not converge: {0}")]
    Solver(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = core::result::Result<T, Error>;
