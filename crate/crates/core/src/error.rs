use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("distribution has no mass: every entry is -inf, or an entry is NaN/+inf")]
    AllMassZero,
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("temperature must be finite and positive, got {0}")]
    NonPositiveTemperature(f64),
    #[error("invalid weight {0}: weights must be finite")]
    InvalidWeight(f64),
    #[error("invalid compose config: {0}")]
    InvalidConfig(String),
    #[error("state has no masked slots")]
    NoMaskedSlots,
    #[error("no state satisfies all conditions")]
    EmptyIntersection,
    #[error("state space of {states} grids exceeds the enumeration cap of {cap}")]
    StateSpaceTooLarge { states: u128, cap: u128 },
    #[error("invalid table: {0}")]
    InvalidTable(String),
    #[error("invalid condition {0}")]
    InvalidCondition(String),
    #[error("condition {0} is not defined by this world")]
    UnknownCondition(String),
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("token {token} out of range for codebook of size {size}")]
    TokenOutOfRange { token: u32, size: usize },
    #[error("need at least {needed} patches, got {got}")]
    TooFewPatches { needed: usize, got: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}
