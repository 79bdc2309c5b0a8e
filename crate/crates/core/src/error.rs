use thiserror::Error;

use crate::valuation::ValuationClass;

#[derive(Debug, Error)]
pub enum Error {
    #[error("instance too large: {0}")]
    InstanceTooLarge(String),
    #[error("price order violation: item {item} has high {high} < low {low}")]
    PriceOrderViolation {
        item: usize,
        high: String,
        low: String,
    },
    #[error("allocation has zero social welfare")]
    ZeroWelfare,
    #[error("not an equilibrium: {0}")]
    NotAnEquilibrium(String),
    #[error("count mismatch: {0}")]
    CountMismatch(String),
    #[error("valuation is not subadditive")]
    NotSubadditive,
    #[error("valuation is not XOS")]
    NotXos,
    #[error("unsupported valuation class: {0:?}")]
    UnsupportedClass(ValuationClass),
    #[error("unknown instance: {0}")]
    UnknownInstance(String),
    #[error("index out of range: {0}")]
    IndexOutOfRange(String),
    #[error("no good pair found (contract violation): {0}")]
    NoPairFound(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("malformed input: {0}")]
    Malformed(String),
    #[error("fixture failed: {0}")]
    FixtureFailed(String),
}

pub type Result<T> = std::result::Result<T, Error>;
