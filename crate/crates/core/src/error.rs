use thiserror::Error;

/// Errors raised while validating parameters or evaluating the mixture laws.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum MixtureError {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },
    #[error("invalid reaction network: {0}")]
    InvalidNetwork(String),
    #[error("negative density {value} passed to pressure law")]
    NegativeDensity { value: f64 },
    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: usize, got: usize },
}

/// Errors from the pointwise flux and entropy-variable algebra.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum AlgebraError {
    #[error("degenerate state: denominator {value:e} below floor {floor:e} at point {point}")]
    Degenerate { point: usize, value: f64, floor: f64 },
    #[error("density {value} at component {component} is not strictly positive")]
    NonPositive { component: usize, value: f64 },
    #[error("(q, rho) lies outside the codomain: rho = {rho}, boundary g(q) = {boundary}")]
    OutsideCodomain { rho: f64, boundary: f64 },
    #[error("Newton inversion did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("truncation parameter delta must be positive, got {0}")]
    InvalidDelta(f64),
    #[error(transparent)]
    Mixture(#[from] MixtureError),
}

/// Errors raised by the time integrator.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("invalid configuration `{field}`: {reason}")]
    Config { field: &'static str, reason: String },
    #[error("blow-up at t = {time}: density {value:e} exceeds {limit:e}")]
    BlowUp { time: f64, value: f64, limit: f64 },
    #[error("non-finite value in component {component} at t = {time}")]
    NonFinite { component: usize, time: f64 },
    #[error("time step collapsed to {dt:e} at t = {time}")]
    StepCollapse { time: f64, dt: f64 },
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
    #[error(transparent)]
    Mixture(#[from] MixtureError),
}

/// Errors from the kernel and compactness diagnostics.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiagnosticsError {
    #[error("kernel width h = {0} outside (0, 1/8]")]
    KernelWidth(f64),
    #[error("grid of {size} points exceeds the double-sum guard of {limit}")]
    TooLarge { size: usize, limit: usize },
}

/// Errors reading or writing the on-disk formats.
#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("config parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("config field `{field}`: {reason}")]
    Field { field: String, reason: String },
    #[error("malformed snapshot {path}: {reason}")]
    Snapshot { path: String, reason: String },
}
