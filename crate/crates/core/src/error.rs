use thiserror::Error;

/// Errors raised by the analysis routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("chain is not irreducible: {0}")]
    NotIrreducible(String),

    #[error("linear solve failed: {0}")]
    SolverFailure(String),

    #[error("target set is unreachable from state {start}")]
    TargetUnreachable { start: usize },

    #[error("survival curve ends at t = {horizon} with s = {last:e}, too short for the request")]
    CurveTooShort { horizon: usize, last: f64 },

    #[error("invalid reference pair: {0}")]
    InvalidPair(String),

    #[error("parameter out of range: {0}")]
    ParamOutOfRange(String),

    #[error("smallness conditions violated: {}", .0.join("; "))]
    SmallnessViolated(Vec<String>),

    #[error("sweep grid is insufficient: {0}")]
    InsufficientGrid(String),

    #[error("chain is not reversible (max detailed-balance violation {0:e})")]
    NotReversible(f64),

    #[error("chain is not birth-death")]
    NotBirthDeath,

    #[error("no state outside the reference pair, supremum is empty")]
    EmptySupremum,

    #[error("{capped} of {count} trajectories exceeded the step cap of {cap}")]
    TrajectoryCap { capped: usize, count: usize, cap: u64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
