use thiserror::Error;

use crate::inference::QueryResult;
use crate::ipf::IpfReport;
use crate::table::JointTable;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("variable '{0}' must have at least two states")]
    TooFewStates(String),
    #[error("duplicate variable name '{0}'")]
    DuplicateName(String),
    #[error("duplicate state '{state}' for variable '{variable}'")]
    DuplicateState { variable: String, state: String },
    #[error("expected {expected} cells, found {found}")]
    WrongCellCount { expected: usize, found: usize },
    #[error("cell {index} is negative or not finite ({value})")]
    NegativeCell { index: usize, value: f64 },
    #[error("total probability mass {mass} deviates from 1 by more than 1e-6")]
    MassOutOfTolerance { mass: f64 },

    #[error("unknown variable '{0}'")]
    UnknownVariable(String),
    #[error("unknown state '{state}' for variable '{variable}'")]
    UnknownState { variable: String, state: String },
    #[error("assignment leaves variable '{0}' unset")]
    IncompleteAssignment(String),
    #[error("no variables to keep")]
    EmptyKeepSet,
    #[error("variable '{0}' listed more than once")]
    RepeatedVariable(String),

    #[error("evidence has zero probability in the table")]
    ZeroProbabilityEvidence,

    #[error("odds ratio requires a 2x2 table over two binary variables")]
    NotTwoByTwo,
    #[error("three-way odds ratio requires a 2x2x2 table over three binary variables")]
    NotTwoCubed,
    #[error("odds ratio undefined: cell {index} is zero")]
    ZeroCell { index: usize },

    #[error("invalid targets: {0}")]
    InvalidTargets(String),
    #[error("invalid fitting configuration: {0}")]
    InvalidConfig(String),
    #[error("target for {variable}={state} is positive but its supporting cells are all zero")]
    TargetUnreachable { variable: String, state: String },
    #[error(
        "fitting did not converge after {} cycles (max residual {:e})",
        .0.report.cycles_used,
        .0.report.max_residual
    )]
    NotConverged(Box<NotConverged>),

    #[error("target variable '{0}' also appears in the evidence")]
    TargetInEvidence(String),
    #[error("no soft evidence to fit")]
    NoSoftEvidence,
    #[error("invalid soft evidence for '{variable}': {reason}")]
    InvalidEvidence { variable: String, reason: String },
    #[error("configuration {0} has zero probability in the table but positive weight")]
    UndefinedConditional(String),
}

/// Partial work returned when fitting exhausts its cycle budget.
#[derive(Debug, Clone)]
pub struct NotConverged {
    pub table: JointTable,
    pub report: IpfReport,
    /// Set when the failure happened inside a posterior query.
    pub query: Option<QueryResult>,
}
