use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("invalid operator: {0}")]
    InvalidOperator(String),

    #[error("leapfrog became unstable at step {step} (t = {time:.6}): norm grew to {norm:.3e}")]
    Instability { step: usize, time: f64, norm: f64 },

    #[error("centroid undefined for an all-zero field")]
    UndefinedCentroid,

    #[error("d'Alembert formula not valid: dependence cone [{lo:.6}, {hi:.6}] leaves (-1, 1)")]
    OutOfValidity { lo: f64, hi: f64 },

    #[error("ray step rejected at t = {time:.6}: |x| = {position:.6} overshoots the boundary; reduce dt")]
    StepRejected { time: f64, position: f64 },

    #[error("degenerate ray: {0}")]
    DegenerateRay(String),

    #[error("orbit is not trapped: {0}")]
    NotTrapped(String),

    #[error("no convergence: {0}")]
    NoConvergence(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
