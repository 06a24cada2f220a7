use thiserror::Error;

/// Errors surfaced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("singular linear system: {0}")]
    Singular(String),

    #[error("Markov chain is reducible")]
    ReducibleChain,

    #[error("coverage violation: behavior chain has zero probability on target transition {from} -> {to}")]
    CoverageViolation { from: usize, to: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("divergence guard tripped at iteration {iteration}, agent {agent} (|theta| = {norm:e})")]
    Divergence {
        iteration: usize,
        agent: usize,
        norm: f64,
    },

    #[error("infeasible network model: {0}")]
    InfeasibleNetwork(String),

    #[error("mixing-weight estimate did not converge within horizon {horizon} (row disagreement {disagreement:e})")]
    PsiNotConverged { horizon: usize, disagreement: f64 },

    #[error("degenerate limit set: {0}")]
    DegenerateLimit(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
