use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("grid integrates degree {exact} exactly but degree {required} is required")]
    GridTooCoarse { exact: usize, required: usize },
    #[error("band limit {got} exceeds the transform band limit {max}")]
    BandLimit { got: usize, max: usize },
    #[error("shape mismatch: expected {expected} values, got {got}")]
    Shape { expected: usize, got: usize },
    #[error("axis must be a unit vector (|axis| = {norm})")]
    NonUnitAxis { norm: f64 },
    #[error("argument out of domain: {0}")]
    Domain(String),
    #[error("norm grew by a factor {growth:.3e} in one step at t = {t}")]
    Unstable { t: f64, growth: f64 },
    #[error("step matrix I + dt/2 K(0) is singular; reduce dt")]
    SingularStep,
    #[error("Neumann series did not converge (L1 norm of kernel {l1_norm:.3}); use the direct Volterra solve")]
    NeumannDiverged { l1_norm: f64 },
    #[error("fit failed: {0}")]
    Fit(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
