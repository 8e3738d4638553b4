use thiserror::Error;

use crate::cnf::{ClauseId, Var};

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors raised anywhere in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("clause {clause}: {msg}")]
    InvalidClause { clause: usize, msg: String },

    #[error("clause {clause} has width {width}, expected {expected}")]
    WidthMismatch {
        clause: usize,
        width: usize,
        expected: usize,
    },

    #[error("bound 2^(k-5) < 1 unsatisfiable by inclusive neighbourhoods for k = {k}; pass an explicit d")]
    BoundUndefined { k: usize },

    #[error("clause index {0} out of range")]
    UnknownClause(usize),

    #[error("assignment covers {got} variables, formula has {expected}")]
    PartialAssignment { got: usize, expected: usize },

    #[error("fixed table has {rows} rows; row {row} of variable {var} requested")]
    RowOverflow { var: Var, row: u64, rows: u64 },

    #[error("table is {got_vars} variables wide, formula has {expected}")]
    TableShape { got_vars: usize, expected: usize },

    #[error("locally_correct called on satisfied clause {0}")]
    ClauseNotViolated(ClauseId),

    #[error("fixed table admits a large witness: correction of clause {clause} aborted after {invocations} invocations")]
    FixedTableAbort { clause: ClauseId, invocations: usize },

    #[error("no satisfying assignment after {0} restarts")]
    RestartLimit(usize),

    #[error("invalid recursion tree: {0}")]
    InvalidTree(String),

    #[error("invalid composite witness: {0}")]
    InvalidWitness(String),

    #[error("variable {var} does not occur at vertex {vertex}")]
    NotOccurring { var: Var, vertex: usize },

    #[error("journal does not end in an aborted correction")]
    NoAbort,

    #[error("inclusive neighbourhood of size {size} exceeds slot bound d = {d}")]
    SlotBound { size: usize, d: usize },

    #[error("undecodable encoding: {0}")]
    Undecodable(String),

    #[error("enumeration budget of {budget} witnesses exceeded (a-priori bound {bound})")]
    BudgetExceeded { budget: u64, bound: String },

    #[error("initial expected number of violated meta-clauses is {0}, not below 1")]
    ExpectationTooLarge(f64),

    #[error("instance infeasible: {0}")]
    Infeasible(String),

    #[error("brute force limited to {limit} variables, formula has {n}")]
    TooManyVariables { n: usize, limit: usize },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
