use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeshError {
    #[error("mesh needs at least one division per side")]
    ZeroDivisions,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpaceError {
    #[error("unsupported polynomial degree {0} (expected 1..=6)")]
    UnsupportedDegree(usize),
    #[error("coefficient vector has length {got}, space has {expected} dofs")]
    CoefficientLength { expected: usize, got: usize },
    #[error("spaces are built on different meshes")]
    MeshMismatch,
    #[error("a lift must be unlifted itself and carry only velocity or magnetic components")]
    InvalidLift,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("matrix is {rows}x{cols}, right-hand side has length {rhs}")]
    DimensionMismatch { rows: usize, cols: usize, rhs: usize },
    #[error("numerically singular matrix: zero pivot at row {row}")]
    Singular { row: usize },
    #[error("linear solve residual {residual:.3e} above tolerance {tolerance:.1e}")]
    Inaccurate { residual: f64, tolerance: f64 },
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("factor storage failed: {0}")]
    Storage(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QoiError {
    #[error("region [{x0}, {x1}] x [{y0}, {y1}] is not aligned with the {n}x{n} grid")]
    NotGridAligned { x0: f64, x1: f64, y0: f64, y1: f64, n: usize },
    #[error("region is empty or outside the domain")]
    EmptyRegion,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error(
        "Newton did not converge{}: {iterations} iterations, residual {residual:.3e}",
        stage.map(|re| format!(" at homotopy stage Re={re}")).unwrap_or_default()
    )]
    NewtonDiverged { iterations: usize, residual: f64, stage: Option<f64> },
    #[error("linear solve failed{}: {source}", stage.map(|re| format!(" at homotopy stage Re={re}")).unwrap_or_default())]
    Linear { source: LinalgError, stage: Option<f64> },
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("invalid config {path}: {message}")]
    Invalid { path: PathBuf, message: String },
}

/// Umbrella error for the end-to-end runner.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Qoi(#[from] QoiError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("reference file {path}: {message}")]
    Reference { path: PathBuf, message: String },
    #[error("i/o error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("csv output: {0}")]
    Csv(#[from] csv::Error),
}

impl From<crate::solvers::AdjointError> for Error {
    fn from(e: crate::solvers::AdjointError) -> Self {
        match e {
            crate::solvers::AdjointError::Qoi(e) => Error::Qoi(e),
            crate::solvers::AdjointError::Solver(e) => Error::Solver(e),
        }
    }
}
