//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("feature set does not span R^{dim}: numerical rank {rank}")]
    RankDeficient { dim: usize, rank: usize },

    #[error("design matrix is singular (min eigenvalue {min_eig:.3e})")]
    SingularDesign { min_eig: f64 },

    #[error("queried vector lies outside the range of a singular design matrix")]
    OutOfDesignRange,

    #[error("max iterations ({max_iter}) exhausted without certificate; best g(rho) = {best_g}")]
    NoCertificate { max_iter: usize, best_g: f64 },

    #[error("separation oracle returned a non-separating hyperplane (<a,z> = {lhs} <= b = {rhs})")]
    SeparationContract { lhs: f64, rhs: f64 },

    #[error("ball walk stalled: no accepted step in {proposals} consecutive proposals (|V'| = {warm_size}, region dim {dim})")]
    SamplerStall {
        proposals: usize,
        warm_size: usize,
        dim: usize,
    },

    #[error("warm start entirely outside the region")]
    EmptyWarmStart,

    #[error("squared-loss oracle failed: {0}")]
    OracleFailure(String),

    #[error("invariant violated at round {round}, horizon {horizon}: {name}")]
    InvariantViolation {
        name: String,
        round: usize,
        horizon: usize,
    },

    #[error("invalid state or action index: {0}")]
    InvalidIndex(String),

    #[error("environment validation failed: {0}")]
    InvalidEnv(String),

    #[error("noise schedule overflow at horizon {horizon}; use a smaller horizon or a scale override")]
    ScheduleOverflow { horizon: usize },

    #[error("config parse error at line {line}: field `{field}`: {message}")]
    ConfigParse {
        line: usize,
        field: String,
        message: String,
    },

    #[error("state left the configured state box at step {step} (|x|_inf = {norm:.3e} > {bound:.3e})")]
    StateBoxEscape { step: usize, norm: f64, bound: f64 },

    #[error("linear optimization oracle has no finite-radius basis (Assumption on basis features unmet); set an explicit radius")]
    NoLinOptRadius,

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
