use thiserror::Error;

pub type Result<T, E = PnpbError> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PnpbError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("bulk void fraction is not positive: 1 - eta * sum v_i C_i^B = {0}")]
    NonPositiveBulkVoid(f64),

    #[error("total void volume is not positive: 1 - eta * sum v_i m_i = {0}")]
    NonPositiveTotalVoid(f64),

    #[error("kernel is singular at r = 0")]
    SingularAtZero,

    #[error("unsupported kernel/dimension combination: {0}")]
    UnsupportedKernel(String),

    #[error("quadrature did not converge on [{a}, {b}]: error estimate {estimate:e}")]
    QuadratureNonConvergence { a: f64, b: f64, estimate: f64 },

    #[error("void fraction collapsed at cell {cell}: Gamma = {gamma}")]
    VoidCollapse { cell: usize, gamma: f64 },

    #[error("nonpositive concentration {value} for species {species} at cell {cell}")]
    NonpositiveConcentration {
        species: usize,
        cell: usize,
        value: f64,
    },

    #[error("linear solve failed for species {species}: residual {residual:e}")]
    LinearSolveFailure { species: usize, residual: f64 },

    #[error(
        "fixed point did not converge after {iterations} iterations (last update {last_update:e})"
    )]
    NoConvergence { iterations: usize, last_update: f64 },

    #[error("kernel cache: {0}")]
    Cache(String),
}
