//! Shared error type for all modules.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter failed a precondition; names the offending field.
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// A scan over a pmf or table matched no points.
    #[error("empty range: {0}")]
    EmptyRange(String),

    /// The overlap table does not extend far enough to answer the query.
    /// `required` is the D-threshold the caller needs the table to exceed.
    #[error("overlap table too short: need D to exceed {required} (table tops out at {available})")]
    NeedsLongerTable { required: f64, available: f64 },

    /// A computation would exceed the configured memory or size budget.
    #[error("instance too large: {0}")]
    TooLarge(String),

    /// Planner scales collapsed (q >= u); the inverse temperature is too
    /// large for a coarse-graining plan on this table.
    #[error("beta too large for coarse-graining: {0}")]
    TooLargeBeta(String),

    /// A plan violates a statistic's structural precondition.
    #[error("invalid plan: {0}")]
    InvalidPlan(String),

    /// Non-finite weights encountered during a layer recursion.
    #[error("numeric overflow in layer recursion at time {layer}")]
    NumericOverflow { layer: usize },

    #[error("format error: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;
