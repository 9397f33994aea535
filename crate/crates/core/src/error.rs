use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        expected: usize,
        found: usize,
        what: &'static str,
    },
    #[error("singular linear system")]
    Singular,
    #[error("dual pair does not satisfy pi(v) = 1 (pi(v) = {pairing})")]
    InvalidDualPair { pairing: f64 },
    #[error("points do not form an affine basis (|det| = {det:e})")]
    SingularBasis { det: f64 },
    #[error("seed point is not a member of the set to flood")]
    SeedOutside,
    #[error("no surrounding affine basis found: {0}")]
    NotSurrounded(String),
    #[error("safety margin check failed: {0}")]
    MarginExceeded(String),
    #[error("degenerate reparametrisation weights: {0}")]
    DegenerateWeights(String),
    #[error("no convergence after {iterations} iterations (best residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("no admissible N up to {max_n} (corrugation sup {corr_sup:e}, remainder sup {rem_sup:e})")]
    BudgetExceeded { max_n: f64, corr_sup: f64, rem_sup: f64 },
    #[error("slice hull misses the target at x = {x:?}: {detail}")]
    AmpleSliceEmpty { x: Vec<f64>, detail: String },
    #[error("winding numbers differ ({w0} vs {w1})")]
    WindingMismatch { w0: i64, w1: i64 },
    #[error("angle sampling too coarse (max step {max_step} rad)")]
    StepTooCoarse { max_step: f64 },
    #[error("inconsistent classification: {0}")]
    Inconsistent(String),
    #[error("landscape not accepted: {0}")]
    NotAccepted(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("improvement step {step} failed: {source}")]
    StepFailed {
        step: usize,
        #[source]
        source: Box<Error>,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
