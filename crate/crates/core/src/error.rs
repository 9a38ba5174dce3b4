//! Crate-wide error type.

use crate::scheme::Condition;

/// Errors surfaced by the coding, placement, shuffle and engine layers.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum Error {
    #[error("unsupported field width {0} (supported: 8, 16)")]
    UnsupportedFieldWidth(u32),

    #[error("division by zero in the finite field")]
    DivisionByZero,

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("codeword length {num}/{den} * m is not an integer")]
    NonIntegerCodewordLength { num: u64, den: u64 },

    #[error("field with 2^{width} elements is too small for {needed} evaluation points")]
    FieldTooSmall { width: u32, needed: u64 },

    #[error("need at least {need} distinct coded rows to decode, got {have}")]
    InsufficientRows { have: usize, need: usize },

    #[error("invalid system parameters: {0}")]
    InvalidParams(String),

    #[error("infeasible rate pair: violates {}", format_conditions(.0))]
    Infeasible(Vec<Condition>),

    #[error("block sizes do not divide evenly; scale m by {m_multiplier} and N by {n_multiplier}")]
    DivisibilityFailure {
        m_multiplier: String,
        n_multiplier: String,
    },

    #[error("reduce assignment needs q | N, got q={q}, N={n_cols}")]
    ColumnsNotDivisible { q: u32, n_cols: u32 },

    #[error("shuffle plan inconsistency: {0}")]
    PlanInconsistency(String),
}

fn format_conditions(conds: &[Condition]) -> String {
    let names: Vec<&str> = conds.iter().map(|c| c.name()).collect();
    names.join(", ")
}

pub type Result<T> = std::result::Result<T, Error>;
