use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid bounds: a = {a} must be strictly less than b = {b}")]
    InvalidBounds { a: f64, b: f64 },
    #[error("invalid size: need at least 2 elements, got {0}")]
    InvalidSize(usize),
    #[error("nodes are not strictly increasing at index {index}")]
    Unordered { index: usize },
    #[error("point {x} lies outside [{a}, {b}]")]
    OutOfDomain { x: f64, a: f64, b: f64 },
    #[error("basis index {index} out of range 1..={max}")]
    IndexOutOfRange { index: usize, max: usize },
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("degenerate mesh: element {index} has length {gap:e}")]
    DegenerateMesh { index: usize, gap: f64 },
    #[error("unknown preset `{0}`")]
    UnknownPreset(String),
    #[error("epsilon must be positive, got {0}")]
    NonpositiveEpsilon(f64),
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error("finite-difference perturbation of node {index} breaks the ordering")]
    PerturbationBreaksOrdering { index: usize },
    #[error("matrix is not positive definite: pivot {pivot:e} at row {row}")]
    NotPositiveDefinite { row: usize, pivot: f64 },
    #[error("step size floor reached at t = {t} after {halvings} halvings")]
    StepFloor { t: f64, halvings: u32 },
    #[error("errors must be positive for order computation, got {0}")]
    NonpositiveError(f64),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, Error>;
