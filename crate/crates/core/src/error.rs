use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("expected {expected} values, found {found}")]
    Length { expected: usize, found: usize },
    #[error("non-finite value {value} at coordinate {coord:?}")]
    NonFinite { coord: Vec<f64>, value: f64 },
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("imaginary residue {residue:e} after inverse transform exceeds tolerance")]
    ImaginaryResidue { residue: f64 },
    #[error("empty family: {0}")]
    EmptyFamily(String),
    #[error("geometry: {0}")]
    Geometry(String),
    #[error("breakdown: {0}")]
    Breakdown(String),
    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("format: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;
