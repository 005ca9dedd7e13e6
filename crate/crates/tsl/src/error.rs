use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("cap exceeded: support size {size} > cap {cap}")]
    CapExceeded { size: usize, cap: usize },
    #[error("malformed partition: {0}")]
    MalformedPartition(String),
    #[error("malformed decomposition: {0}")]
    MalformedDecomposition(String),
    #[error("invalid tree: {0}")]
    InvalidTree(String),
    #[error("invalid spec: {0}")]
    InvalidSpec(String),
    #[error("precondition failed: {0}")]
    PreconditionFailed(String),
    #[error("non-dyadic coefficient: {0}")]
    NonDyadicCoefficient(String),
    #[error("supply exhausted: {0}")]
    SupplyExhausted(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
}

pub type Result<T> = std::result::Result<T, Error>;
