use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("demand sum lies on the capacity circle; slack is zero")]
    DegenerateSlack,
    #[error("state-space budget exceeded: {needed} > {budget}")]
    BudgetExceeded { needed: u128, budget: u128 },
    #[error("enumeration cap exceeded: {needed} > {cap}")]
    CapExceeded { needed: u128, cap: u128 },
    #[error("range is empty")]
    EmptyRange,
    #[error("no exact fit at ({0}, {1})")]
    NoExactFit(usize, usize),
    #[error("precondition violated: {0}")]
    PreconditionViolated(String),
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("integer overflow while scaling {0}")]
    Overflow(&'static str),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
