use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    /// A multiplier or quantization description violates its invariants.
    #[error("invalid configuration: {0}")]
    Invalid(String),
    /// No packing geometry fits the multiplier.
    #[error("infeasible packing: {0}")]
    Infeasible(String),
    /// A packed word or accumulator would exceed its bit budget.
    #[error("overflow: {0}")]
    Overflow(String),
    /// A value or bit range lies outside what its container can hold.
    #[error("out of range: {0}")]
    Range(String),
    /// Sequence lengths or tensor shapes do not line up.
    #[error("shape mismatch: {0}")]
    Shape(String),
}
