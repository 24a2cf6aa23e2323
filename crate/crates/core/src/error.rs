use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid kernel: non-finite profile value at r = {radius}")]
    InvalidKernel { radius: f64 },

    #[error("stencil too coarse: dx = {dx} is at least twice the support radius {support_radius}")]
    StencilTooCoarse { dx: f64, support_radius: f64 },

    #[error("stencil too wide: {width} cells along an axis of {cells} cells")]
    StencilTooWide { width: usize, cells: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("newton iteration failed to converge (residual {residual:e} after {iterations} iterations)")]
    StepFailure { residual: f64, iterations: usize },

    #[error("positivity violation: value {min:e} at cell {cell}")]
    PositivityViolation { min: f64, cell: usize },

    #[error("tau = {tau} is at or past the event at tau = {event}")]
    EventBoundary { tau: f64, event: f64 },

    #[error("config error in {field}: {message}")]
    Config { field: String, message: String },

    #[error("parse error in {path:?} line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    pub(crate) fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }
}
