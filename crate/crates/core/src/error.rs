use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("sample is empty")]
    EmptySample,

    #[error("observability violated at index {index}: u={u}, x={x}, v={v} (need u <= x <= v)")]
    Observability { index: usize, u: f64, x: f64, v: f64 },

    #[error("non-finite value at index {index}")]
    NonFinite { index: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("NPMLE does not exist or is not unique: observation digraph has {scc_count} strongly connected components")]
    NonExistence { scc_count: usize },

    #[error("NPMLE iteration did not converge after {iterations} iterations (last step {last_step:e})")]
    NonConvergence { iterations: usize, last_step: f64 },

    #[error("optimizer failure: {0}")]
    OptimizerFailure(String),

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("truncation times must lie in (0, 1) for beta families (index {index}, u={u}); rescale the sample first")]
    OutsideUnitInterval { index: usize, u: f64 },

    #[error("rejection budget of {budget} draws exceeded without an observable triplet")]
    RejectionBudgetExceeded { budget: u64 },

    #[error("acceptance probability below {threshold:e} after {proposals} proposals")]
    LowAcceptance { proposals: u64, threshold: f64 },

    #[error("only {usable} of {requested} bootstrap replicates usable (need {required})")]
    InsufficientReplicates { usable: usize, requested: usize, required: usize },

    #[error("every LSCV score on the bandwidth grid is infinite")]
    AllScoresInfinite,

    #[error("roughness of the hazard's second derivative vanishes; use LSCV instead")]
    FlatCurvature,

    #[error("line {line}: {message}")]
    Csv { line: u64, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
