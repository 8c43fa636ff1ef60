use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("pilot length {tau} must satisfy U + M = {needed} <= tau <= T = {coherence}")]
    PilotLength {
        tau: usize,
        needed: usize,
        coherence: usize,
    },
    #[error("weights must be nonnegative and sum to 1 (w1 = {w1}, w2 = {w2})")]
    WeightSum { w1: f64, w2: f64 },
    #[error("zero-forcing needs L > U + M (L = {antennas}, U + M = {entities})")]
    ZfDimension { antennas: usize, entities: usize },
    #[error("association cap {cap} outside [1, U + M = {entities}]")]
    AssocCap { cap: usize, entities: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("ill-conditioned Gram matrix (condition number {0:e})")]
    SingularGram(f64),
    #[error("initial point is outside the feasible set by {0:e}")]
    InfeasibleStart(f64),
    #[error("convex subproblem infeasible at the current linearization (violation {0:e})")]
    SubproblemInfeasible(f64),
    #[error("config parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
