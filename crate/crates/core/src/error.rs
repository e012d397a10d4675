use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid profile descriptor: {0}")]
    InvalidProfile(String),

    #[error("profile not strictly negative (max F = {max})")]
    ProfileNotNegative { max: f64 },

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("empty system: every degree of freedom is constrained")]
    EmptySystem,

    #[error("factorization failed at pivot {index} (value {pivot:e})")]
    Factorization { index: usize, pivot: f64 },

    #[error("eigensolver did not converge after {iterations} iterations (worst residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("no double cluster: {0}")]
    NoDoubleCluster(String),

    #[error("boundary form does not split the cluster (relative gap {gap:e} < {tol:e})")]
    NeravViolated { gap: f64, tol: f64 },

    #[error("solvability violated: residues {residues:?} exceed {tol:e}")]
    SolvabilityViolated { residues: Vec<f64>, tol: f64 },

    #[error("slope fit failed: {0}")]
    Fit(String),

    #[error("decay fit failed: {0}")]
    Decay(String),

    #[error("study failed: {flagged} of {total} values of N flagged")]
    StudyFailed { flagged: usize, total: usize },

    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
