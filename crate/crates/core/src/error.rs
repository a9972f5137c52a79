use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("basis index {idx} out of range for dimension {dim}")]
    IndexOutOfRange { idx: usize, dim: usize },
    #[error("interface position {0} is not a node of the uniform mesh")]
    InterfaceNotOnGrid(f64),
    #[error("nonlinearity assumption violated: {0}")]
    AssumptionViolated(String),
    #[error("operator requires an affine nonlinearity")]
    NotLinear,
    #[error("quadrature window too small: tail bound {tail:.3e} exceeds budget {budget:.3e}")]
    WindowTooSmall { tail: f64, budget: f64 },
    #[error("singular system: {0}")]
    SingularSystem(String),
    #[error("linear solve failed: {0}")]
    LinearSolveFailure(String),
    #[error("inner iteration diverged after {iterations} iterations (increment {increment:.3e})")]
    InnerDivergence { iterations: usize, increment: f64 },
    #[error("inner iteration did not reach tolerance in {iterations} iterations (increment {increment:.3e})")]
    InnerNotConverged { iterations: usize, increment: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
