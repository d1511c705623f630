use thiserror::Error;

/// Errors raised anywhere in the coding, synchronization and analysis layers.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("modulus {0} is not prime")]
    NonPrimeModulus(u64),
    #[error("zero has no multiplicative inverse")]
    ZeroInverse,
    #[error("operands belong to different fields (F_{left} vs F_{right})")]
    MixedFields { left: u64, right: u64 },
    #[error("evaluation points are not pairwise distinct")]
    DuplicateNodes,
    #[error("field F_{q} is too small: {needed} distinct elements required")]
    FieldTooSmall { q: u64, needed: usize },
    #[error("matrix is singular")]
    Singular,
    #[error("matrix does not have full row rank")]
    RankDeficient,
    #[error("index {index} out of range (length {len})")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("block length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("subset size {found} does not match required size {expected}")]
    BadSubsetSize { expected: usize, found: usize },
    #[error("edits do not form one deletion per user")]
    NonUniformEdits,
    #[error("user {user} has no trailing pad slot for an insertion")]
    NoPadSlack { user: usize },
    #[error("deleted value for user {user} is unknown")]
    MissingValue { user: usize },
    #[error("reported value {reported} for user {user} differs from the stored symbol {stored}")]
    ValueMismatch {
        user: usize,
        reported: u64,
        stored: u64,
    },
    #[error("configuration does not match the protocol: {0}")]
    ConfigMismatch(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("storage budget must be positive")]
    InfeasibleBudget,
    #[error("no single insertion matches the syndrome")]
    NoCandidate,
    #[error("several distinct strings match the syndrome")]
    AmbiguousRecovery,
    #[error("{affected} affected users exceed the {limit} recoverable")]
    TooManyAffected { affected: usize, limit: usize },
    #[error("enumeration too large ({0} candidates)")]
    TooLarge(u128),
    #[error("iteration did not converge")]
    NonConvergence,
    #[error("demo output diverges from the reference table: {0}")]
    DemoMismatch(String),
}

pub type Result<T> = std::result::Result<T, Error>;
