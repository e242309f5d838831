use thiserror::Error;

/// Errors produced by the solver and analysis routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("grid size {grid} too small for truncation {truncation} (need at least {})", 4 * truncation)]
    Aliasing { grid: usize, truncation: usize },

    #[error("Jacobian is singular or numerically rank-deficient")]
    SingularJacobian,

    #[error("Newton iteration diverged after {iterations} steps (residual {residual:.3e})")]
    NewtonDiverged { iterations: usize, residual: f64 },

    #[error("resonant denominator 2 - kappa*a_{{{mode}}} vanishes in the z-recursion")]
    ResonantDenominator { mode: usize },

    #[error("kappa is on the wrong side of the bifurcation point for this signature")]
    SideMismatch,

    #[error("mode set is not a valid resonance triple: {0}")]
    NotResonant(String),

    #[error("coincident modes detected at level {level:.6e}; use the multi-mode path")]
    CoincidentModes { level: f64 },

    #[error("degenerate level: denominator {denominator:.3e} below tolerance in B-matrix entry ({i},{j})")]
    DegenerateLevel { i: usize, j: usize, denominator: f64 },

    #[error("no-resonance condition ({condition}) of the multi-mode theorem is violated by {detail}")]
    ResonanceViolation { condition: &'static str, detail: String },

    #[error("no root of the target equation in the search bracket")]
    NoRoot,

    #[error("insufficient branch points for the requested fit (have {have}, need {need})")]
    InsufficientPoints { have: usize, need: usize },

    #[error("branch is not on the subcritical side of the bifurcation point")]
    NotSubcritical,

    #[error("branch switching collapsed to the trivial solution at every attempted amplitude")]
    BranchCollapse,

    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;

/// Checks every entry of a slice for NaN/inf before it enters a kernel.
pub fn ensure_finite(values: &[f64], what: &'static str) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}
