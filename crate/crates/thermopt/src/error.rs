use thiserror::Error;

/// Errors shared by all solver and model operations.
#[derive(Debug, Error)]
pub enum Error {
    /// Input outside the mathematical domain of an operation (nonpositive
    /// energy, volume below covolume, unknown model for a formula, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// The moment problem has no finite solution: the target expectation is
    /// on or outside the convex hull of the random vector values.
    #[error("infeasible target: {0}")]
    Infeasible(String),

    /// An iterative solver exhausted its iteration budget.
    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    /// Floating-point range exhausted (overflowing exponentials and alike).
    #[error("range error: {0}")]
    Range(String),

    /// A quadrature or root-finding interval crosses a singular point of the
    /// current chart.
    #[error("chart violation: {0}")]
    ChartViolation(String),

    /// Levels and coordinates are mutually inconsistent (negative discriminant
    /// beyond tolerance, point off the invariant manifold).
    #[error("off-manifold point: {0}")]
    OffManifold(String),

    /// Degenerate invariant levels (double roots of the discriminant) where
    /// the angle construction breaks down.
    #[error("degenerate levels: {0}")]
    DegenerateLevels(String),

    /// A denominator guard tripped (reduced Hamiltonian below its floor).
    #[error("near-singular evaluation: {0}")]
    NearSingular(String),

    /// Two independent computations of the same quantity disagree.
    #[error("internal consistency error: {0}")]
    InternalInconsistency(String),

    /// Boundary problem endpoints cannot be joined by an extremal.
    #[error("unreachable endpoint: {0}")]
    UnreachableEndpoint(String),

    /// Not enough samples to run a quadrature.
    #[error("sample set too sparse: {0}")]
    SparseSamples(String),

    /// Scenario/configuration validation failure.
    #[error("validation error: {0}")]
    Validation(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code for the CLI: 3 for validation problems, 2 for
    /// solver failures, matching the documented contract.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Validation(_) | Error::Json(_) | Error::Domain(_) => 3,
            _ => 2,
        }
    }
}
