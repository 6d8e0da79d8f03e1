use thiserror::Error;

/// Errors raised by the solver library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum SlqError {
    #[error("mesh needs at least 2 cells (got {cells})")]
    TooFewCells { cells: usize },

    #[error("invalid domain length {0}")]
    InvalidLength(f64),

    #[error("invalid time grid: {0}")]
    InvalidTimeGrid(String),

    #[error("shape mismatch in {what}: expected {expected}, got {got}")]
    ShapeMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("matrix is not positive definite (pivot {pivot} at row {row})")]
    NotPositiveDefinite { row: usize, pivot: f64 },

    #[error("{what} does not vanish on the boundary: value {value:e} at x = {x}")]
    BoundaryViolation { what: String, x: f64, value: f64 },

    #[error("invalid problem data: {0}")]
    InvalidData(String),

    #[error("index {index} out of range (limit {limit})")]
    IndexOutOfRange { index: u64, limit: u64 },

    #[error("coarsening factor {factor} does not divide {steps} steps")]
    NotDivisible { factor: usize, steps: usize },

    #[error(
        "multiplicative noise (gamma != 0) is unsupported by the optimizer: conditional \
         expectations are only exact for additive noise and would need regression estimates"
    )]
    MultiplicativeNoise,

    #[error("step parameter kappa = {kappa} must exceed the Lipschitz bound {bound}")]
    StepTooLarge { kappa: f64, bound: f64 },

    #[error("Monte Carlo estimate needs at least one sample")]
    NoSamples,

    #[error("scenario tree too large: {0}")]
    TreeTooLarge(String),

    #[error("adaptedness violated at node {node}: scenarios disagree by {gap:e}")]
    AdaptednessViolation { node: String, gap: f64 },

    #[error("levels are not nested: {0}")]
    NotNested(String),

    #[error("internal solver failure: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, SlqError>;

pub(crate) fn check_len(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(SlqError::ShapeMismatch {
            what,
            expected,
            got,
        })
    }
}
