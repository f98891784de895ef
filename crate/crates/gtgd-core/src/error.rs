//! Error type shared by every module of the crate.

use thiserror::Error;

/// Failures reported by the library. Negative answers (no homomorphism, a
/// containment that fails, ...) are values, never errors.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("syntax error at line {line}, column {col}: {msg}")]
    Syntax { line: usize, col: usize, msg: String },

    #[error("arity conflict for {pred}: used with arity {first} and {second}")]
    ArityConflict { pred: String, first: usize, second: usize },

    #[error("unknown section `{0}`")]
    UnknownSection(String),

    #[error("invalid document: {0}")]
    Invalid(String),

    #[error("arity mismatch: expected {expected}, got {got}")]
    ArityMismatch { expected: usize, got: usize },

    #[error("TGD set is not guarded: {0}")]
    NotGuarded(String),

    #[error("TGD set is not frontier-guarded with at most {m} head atoms: {reason}")]
    NotFrontierGuarded { m: usize, reason: String },

    #[error("TGD set is not linear: {0}")]
    NotLinear(String),

    #[error("TGD set is not full: {0}")]
    NotFull(String),

    #[error("k = {k} is below the arity threshold {required}: approximations are refused below it because they need not exist in any useful finite form")]
    BelowArityThreshold { k: usize, required: usize },

    #[error("size limit exceeded: {0}")]
    SizeLimit(String),

    #[error("{what} cap of {cap} exceeded")]
    CapExceeded { what: String, cap: usize },

    #[error("query treewidth exceeds the supplied decomposition width {k}")]
    WidthExceeded { k: usize },

    #[error("trigger is not a homomorphism from the TGD body into the instance")]
    TriggerNotHomomorphism,

    #[error("precondition violated: {0}")]
    PreconditionViolated(String),

    #[error("the two specifications use different TGD sets")]
    DifferingSigma,

    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),

    #[error("tuple is not guarded in the instance: {0}")]
    NotGuardedTuple(String),

    #[error("invalid minor map: {0}")]
    InvalidMinorMap(String),

    #[error("subset requirement violated: {0}")]
    NotSubset(String),

    #[error("no grid minor found: {0}")]
    NoGridMinor(String),

    #[error("reduction precondition (item {item}) failed: {evidence}")]
    LemmaPreconditionFailed { item: usize, evidence: String },

    #[error("no finite witness found within domain cap {cap}")]
    FiniteWitnessNotFound { cap: usize },

    #[error("budget exceeded: {0}")]
    BudgetExceeded(String),
}

pub type Result<T> = std::result::Result<T, Error>;
