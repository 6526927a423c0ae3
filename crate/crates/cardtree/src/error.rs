use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A tree failed structural validation; `node` names the offending node.
    #[error("invalid tree at node {node}: {reason}")]
    InvalidTree { node: String, reason: String },

    /// Two subsets of a family overlap without one containing the other.
    #[error("subsets {a:?} and {b:?} overlap but neither contains the other")]
    NotNested { a: Vec<usize>, b: Vec<usize> },

    /// The model assigns zero probability to every configuration. The node id
    /// points at the message that first collapsed to zero.
    #[error("model has zero probability mass (detected at node {node})")]
    ZeroMass { node: usize },

    #[error("unknown node id {0}")]
    UnknownNode(usize),

    /// A matching variable's belief collapsed to zero under the constraints.
    #[error("variable ({row}, {col}) has an all-zero belief; problem is infeasible")]
    Infeasible { row: usize, col: usize },

    #[error("infeasible initial configuration: {0}")]
    InfeasibleInit(String),

    /// A bag's likelihood is zero under both labels.
    #[error("bag has zero probability mass under both labels")]
    MilZeroMass,

    #[error("divergence at iteration {iter}: {reason}")]
    Divergence { iter: usize, reason: String },

    #[error("problem too large: {0}")]
    TooLarge(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
