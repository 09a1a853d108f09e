use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    // graph
    #[error("window side {side} is smaller than the required {required}")]
    WindowTooSmall { side: f64, required: f64 },
    #[error("covering repair failed: probe at {probe:?} is {gap} away from every vertex (R = {radius})")]
    CoveringRepairFailed { probe: Vec<f64>, gap: f64, radius: f64 },
    #[error("points are not in general position: {0}")]
    GeneralPositionViolated(String),
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("voronoi cell of vertex {0} is empty after clipping")]
    DegenerateCell(usize),
    #[error("invalid graph parameters: {0}")]
    InvalidParams(String),

    // energy
    #[error("argument {0} is outside the open interval (-1, 1)")]
    OutOfRange(f64),
    #[error("edge ({0}, {1}) has zero length")]
    DegenerateEdge(usize, usize),
    #[error("no deformation value for vertex {0}")]
    MissingVertexValue(usize),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("potential is not differentiable: {0}")]
    NonDifferentiablePotential(String),
    #[error("growth sandwich violated: {0}")]
    SandwichViolated(String),

    // zero temperature
    #[error("minimization did not converge after {iterations} iterations (best energy {best_energy}, gradient {grad_norm})")]
    NotConverged { iterations: usize, best_energy: f64, grad_norm: f64 },
    #[error("soft boundary box is empty: {0}")]
    InfeasibleBoundary(String),
    #[error("invalid partition: {0}")]
    PartitionInvalid(String),

    // finite temperature
    #[error("matrix is not positive definite (pivot {pivot} at row {row})")]
    NotPositiveDefinite { row: usize, pivot: f64 },
    #[error("chain diverged: energy {energy} exceeds guard {guard}")]
    ChainDiverged { energy: f64, guard: f64 },
    #[error("poor overlap at lambda node {node} (lambda = {lambda}): variance {variance} exceeds {threshold}")]
    OverlapFailure { node: usize, lambda: f64, variance: f64, threshold: f64 },
    #[error("effective sample size {ess} below floor {floor} at lambda node {node}")]
    InsufficientSampling { node: usize, ess: f64, floor: f64 },

    // studies
    #[error("grid too small: {0}")]
    GridTooSmall(String),
    #[error("ill-conditioned fit: {0}")]
    IllConditionedFit(String),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("parse error: {0}")]
    Parse(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
