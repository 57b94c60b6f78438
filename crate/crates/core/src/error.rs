use thiserror::Error;

/// Per-criterion elimination counts reported when a stencil ends up empty.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StencilDiagnostics {
    pub candidates: usize,
    pub removed_solid: usize,
    pub removed_distance: usize,
    pub removed_field_of_view: usize,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("index {index} out of range (len {len})")]
    Index { index: usize, len: usize },

    #[error("surface quality: {0}")]
    SurfaceQuality(String),

    #[error("stencil starvation for IB cell {cell}: {diagnostics:?}")]
    StencilStarvation {
        cell: usize,
        diagnostics: StencilDiagnostics,
    },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("assembly: {0}")]
    Assembly(String),

    #[error("linear solver failed: {reason} (residual history tail {history:?})")]
    Solver { reason: String, history: Vec<f64> },

    #[error("incompatible pressure right-hand side: imbalance {imbalance:e} > tolerance {tolerance:e}")]
    Compatibility { imbalance: f64, tolerance: f64 },

    #[error("outer loop stalled at t = {time}: residuals {residuals:?}")]
    StepStalled { time: f64, residuals: Vec<f64> },

    #[error("configuration errors:\n  {}", .0.join("\n  "))]
    Config(Vec<String>),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
