use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("non-finite sample at node {0}")]
    NonFinite(usize),
    #[error("operation undefined for the zero field")]
    ZeroField,
    #[error("degenerate brackets: {0}")]
    Degenerate(String),
    #[error("nodal projection failed: {0}")]
    Projection(String),
    #[error("geometry violation: {0}")]
    Geometry(String),
    #[error("tail mass {tail:.3e} exceeds guard {guard:.3e}")]
    TailGuard { tail: f64, guard: f64 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
