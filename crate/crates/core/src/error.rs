use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("axis {axis} out of range for a {dims}-d grid")]
    AxisOutOfRange { axis: usize, dims: usize },

    #[error("derivative order must be >= 1, got {0}")]
    InvalidOrder(usize),

    #[error("shape mismatch: expected {expected} values, got {got}")]
    ShapeMismatch { expected: usize, got: usize },

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("depth must be strictly positive (min {0})")]
    NonPositiveDepth(f64),

    #[error("no wavenumber root on the requested branch (omega={omega}, u={u_along}, depth={depth})")]
    NoRoot { omega: f64, u_along: f64, depth: f64 },

    #[error("root solve did not converge within {iters} iterations (residual {residual:e})")]
    NonConvergence { iters: usize, residual: f64 },

    #[error("separable symbol rank insufficient: error {achieved:e} > {required:e} at rank {rank}")]
    RankInsufficient { rank: usize, achieved: f64, required: f64 },

    #[error("grid too large for dense operator: {points} points exceeds {limit}")]
    GridTooLarge { points: usize, limit: usize },

    #[error("time step {dt} exceeds the stability bound {bound}")]
    CflViolation { dt: f64, bound: f64 },

    #[error("non-finite value detected at t={t}")]
    NumericalInstability { t: f64 },

    #[error("unsupported environment: {0}")]
    UnsupportedEnvironment(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("linear solve failed: {0}")]
    SingularSystem(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}
