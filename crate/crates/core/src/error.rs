use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("parse error at byte {pos}: {msg}")]
    Parse { pos: usize, msg: String },

    #[error("probabilities sum to {0}, not 1")]
    NotNormalized(String),

    #[error("a die needs at least two values with positive probability (got {0})")]
    TooFewValues(usize),

    #[error("probability for value {0} is not positive")]
    NonPositiveProbability(i64),

    #[error("degenerate distribution: variance is zero")]
    Degenerate,

    #[error("integer overflow while {0}")]
    Overflow(&'static str),

    #[error("common probability denominator {0} does not fit in 64 bits")]
    DenominatorTooLarge(String),

    #[error("resource budget exceeded at n = {n}: {what}")]
    BudgetExceeded { n: u64, what: String },

    #[error("n = {n} is below the validity floor {floor} (constraint {constraint})")]
    BelowValidityFloor { n: u64, floor: u64, constraint: &'static str },

    #[error("n = {n} is not in residue class {residue} mod {span}")]
    WrongClass { n: u64, residue: u64, span: u64 },

    #[error("s = {s} violates s <= min(1, pi*sigma/3, (q1 n)^(-1/4)) = {max}")]
    SplitPointTooLarge { s: f64, max: f64 },

    #[error("leading constant L is exactly zero for residue {0}; higher-order terms are needed")]
    SymmetricUndetermined(u64),

    #[error("search cap {0} exceeded")]
    SearchCapExceeded(u64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("certified bound contradicted by exact tilt at n = {0}")]
    BoundViolation(u64),
}

pub type Result<T> = std::result::Result<T, Error>;
