use thiserror::Error;

/// Errors produced across the pipeline stages.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("incoherence needs at least 2 columns, got {0}")]
    TooFewColumns(usize),

    #[error("no dictionary with mu <= {target} after {attempts} attempts (best {best})")]
    TargetMuInfeasible {
        target: f64,
        attempts: usize,
        best: f64,
    },

    #[error("sample set carries no ground truth")]
    NoGroundTruth,

    #[error("node list invalid: {0}")]
    InvalidNodes(String),

    #[error("connection graph has no edges")]
    EmptyGraph,

    #[error("threshold T evaluates to 0 (p={p}, k={k}, m={m}, ell={ell}); more samples needed")]
    ThresholdUnderflow {
        p: usize,
        k: usize,
        m: usize,
        ell: usize,
    },

    #[error("every one of {0} rounds was skipped (no node had enough neighbours)")]
    AllRoundsSkipped(usize),

    #[error("cluster {cluster}: member {member} has no labelled path to the seed member")]
    UnlabelledMember { cluster: usize, member: usize },

    #[error("empty cluster {0}")]
    EmptyCluster(usize),

    #[error("column {0}: sum of vectors has zero norm")]
    ZeroNorm(usize),

    #[error("least squares system is rank deficient or ill conditioned (cond estimate {0:e})")]
    IllConditioned(f64),

    #[error("sample pool exhausted: wanted {wanted}, {remaining} remaining")]
    PoolExhausted { wanted: usize, remaining: usize },

    #[error("refinement diverged at round {round}: changes {changes:?}")]
    Diverged { round: usize, changes: Vec<f64> },

    #[error("unknown strategy '{name}' (available: {available})")]
    UnknownStrategy { name: String, available: String },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
