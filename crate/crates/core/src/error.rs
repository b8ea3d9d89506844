use thiserror::Error;

/// Errors raised by the discretization, the time loop and the solver.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("degenerate background box: {0}")]
    DegenerateBox(String),

    #[error("no background cell intersects the physical domain at t = {time}")]
    EmptyPhysicalMesh { time: f64 },

    #[error(
        "containment violated at step {step}: {detail} (previous extension does not cover the current domain)"
    )]
    ContainmentViolation { step: usize, detail: String },

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("linear solve did not reach rel_tol {rel_tol:e}: achieved {achieved:e} after {refinements} refinement sweeps")]
    SolverNotConverged {
        rel_tol: f64,
        achieved: f64,
        refinements: usize,
    },

    #[error("pressure gauge: {0}")]
    Gauge(String),

    #[error("normalization of `{norm}` is zero; exact solution vanishes")]
    ZeroNormalizer { norm: &'static str },

    #[error("{0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
