use thiserror::Error;

use crate::expr::{EvalError, ParseError};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid family: {0}")]
    InvalidFamily(String),
    #[error("invalid order field: {0}")]
    InvalidOrder(String),
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("degenerate modular: nonzero function has zero modular at every scale")]
    DegenerateModular,
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("line search stagnated after {iterations} iterations (gradient sup-norm {gradient_sup_norm:e})")]
    Stagnation {
        iterations: usize,
        gradient_sup_norm: f64,
        last_iterate: Vec<f64>,
    },
    #[error("no negative-energy start found after {halvings} halvings of the bump amplitude")]
    SmallTimeFailure { halvings: usize },
    #[error("J(u0) = {energy:e} >= 0 at lambda = {lambda}; measured threshold is {threshold}")]
    BelowThreshold {
        lambda: f64,
        threshold: f64,
        energy: f64,
    },
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("config: {0}")]
    Config(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(String),
}
