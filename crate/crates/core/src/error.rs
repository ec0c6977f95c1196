use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    /// Missing field or wrongly shaped document.
    #[error("schema error: {0}")]
    Schema(String),
    /// Well-shaped but invalid value (bad decimal, lower > upper, duplicate subset, ...).
    #[error("invalid value: {0}")]
    Value(String),
    /// A worker or firm name that is not declared in the instance.
    #[error("unknown reference: {0}")]
    Reference(String),
    #[error("operation not available in {0} mode")]
    Mode(&'static str),
    #[error("worker set {0} has no entry in the valuation table")]
    UnknownSet(String),
    #[error("enumeration of {needed} items exceeds the cap of {cap}")]
    CapExceeded { needed: u128, cap: u128 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("solution status is {0}, expected optimal")]
    Status(String),
    #[error("instance has positive lower quotas; use the lower-bound program")]
    LowerBoundPresent,
    #[error("no assignment satisfies every firm's quotas")]
    NoFeasibleAssignment,
    #[error("payoffs do not match the assignment: {0}")]
    Mismatch(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("operation requires exactly one firm, instance has {0}")]
    MultiFirm(usize),
    #[error("unknown fixture `{0}`")]
    UnknownFixture(String),
}
