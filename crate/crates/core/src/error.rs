use thiserror::Error;

use crate::lp::LpError;

/// Errors raised by the capacity-planning toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("chamber count {n} out of range: supported range is 1..={max}")]
    ChamberCount { n: usize, max: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("enumeration aborted after exceeding the node budget of {budget} branch nodes")]
    NodeBudget { budget: u64 },

    #[error("job '{job}' has no qualified (tool, chamber) pair; instance is structurally infeasible")]
    StructurallyInfeasible { job: String },

    #[error("recipe {recipe} is not qualified for job '{job}' on tool '{tool}'")]
    NotQualified { job: String, tool: String, recipe: String },

    #[error("invalid instance: {0}")]
    Instance(String),

    #[error("unknown {what} '{value}', expected one of {expected}")]
    UnknownName { what: &'static str, value: String, expected: &'static str },

    #[error("invalid cut matrix: {0}")]
    CutMatrix(String),

    #[error("invalid flow: {0}")]
    Flow(String),

    #[error("witness check failed: {0}")]
    Witness(String),

    #[error("unexpected solver status {status:?} for {context}")]
    SolverStatus { status: crate::lp::Status, context: &'static str },

    #[error(transparent)]
    Lp(#[from] LpError),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
