use thiserror::Error;

/// Errors raised by the numerical kernels.
#[derive(Debug, Error)]
pub enum Error {
    /// A coefficient or data field produced a non-finite value.
    #[error("non-finite value while evaluating {what} at ({x}, {y})")]
    Evaluation { what: String, x: f64, y: f64 },

    /// An input lies outside the domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Mesh construction failed.
    #[error("meshing failed: {0}")]
    Mesh(String),

    /// Stiffness assembly rejected the coefficient field.
    #[error("assembly failed: {0}")]
    Assembly(String),

    /// Problem data is missing or inconsistent with the mesh.
    #[error("data error: {0}")]
    Data(String),

    /// The iterative solver did not reach its tolerance.
    #[error("solver stagnated after {iterations} iterations (relative residual {residual:.3e})")]
    Solver {
        iterations: usize,
        residual: f64,
        history: Vec<f64>,
    },

    /// A configuration value violates a guard.
    #[error("config error: {0}")]
    Config(String),

    /// An internal invariant was broken upstream (e.g. lost ellipticity).
    #[error("invariant violated: {0}")]
    Invariant(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
