use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("invalid shape parameters: {0}")]
    InvalidParams(String),
    #[error("face overlap is undefined: both face masks are empty")]
    UndefinedOverlap,
    #[error("face masks have different resolutions ({0} vs {1})")]
    ResolutionMismatch(usize, usize),
    #[error("resolution must be at least {min}, got {got}")]
    Resolution { min: usize, got: usize },
}

#[derive(Debug, Error)]
pub enum HomogenizationError {
    #[error("invalid material: E = {e}, nu = {nu}")]
    InvalidMaterial { e: f64, nu: f64 },
    #[error("voxel grid contains no solid element")]
    EmptyStructure,
    #[error("invalid cell: {0}")]
    InvalidCell(String),
    #[error("conjugate gradient did not converge after {iterations} iterations (relative residual {residual:.3e})")]
    SolverFailure { iterations: usize, residual: f64 },
    #[error("degenerate cell: {0}")]
    DegenerateCell(String),
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("degenerate point set: {0}")]
    Degenerate(String),
    #[error("valid yield {valid}/{candidates} is below the 10% abort threshold")]
    LowYield { valid: usize, candidates: usize },
    #[error("empty input: {0}")]
    Empty(String),
    #[error("malformed dataset: {0}")]
    Malformed(String),
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("training diverged at iteration {iteration}: non-finite loss")]
    Diverged { iteration: usize },
    #[error("empty training set")]
    EmptyTrainingSet,
    #[error("invalid model: {0}")]
    Invalid(String),
}

#[derive(Debug, Error)]
pub enum TopOptError {
    #[error("ill-posed model: {0}")]
    IllPosed(String),
    #[error("infeasible configuration: {0}")]
    Infeasible(String),
    #[error("query node outside mesh: {0}")]
    QueryOutsideMesh(String),
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
}

#[derive(Debug, Error)]
pub enum AssemblyError {
    #[error("no valid candidate for element {element} ({candidates} candidates tried)")]
    AssignmentFailure { element: usize, candidates: usize },
    #[error("incomplete assignment grid: expected {expected} cells, got {got}")]
    Incomplete { expected: usize, got: usize },
}

/// Crate-level error, wrapping the per-module errors.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Homogenization(#[from] HomogenizationError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    TopOpt(#[from] TopOptError),
    #[error(transparent)]
    Assembly(#[from] AssemblyError),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("CSV error on {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("JSON error on {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    /// True for errors caused by invalid user input rather than runtime failures.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Geometry(GeometryError::InvalidParams(_))
                | Error::Homogenization(HomogenizationError::InvalidMaterial { .. })
                | Error::Dataset(DatasetError::Empty(_))
                | Error::Dataset(DatasetError::Malformed(_))
                | Error::TopOpt(TopOptError::Infeasible(_))
                | Error::TopOpt(TopOptError::InvalidProblem(_))
                | Error::TopOpt(TopOptError::QueryOutsideMesh(_))
                | Error::Json { .. }
                | Error::Csv { .. }
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
