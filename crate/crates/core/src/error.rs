use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum GeoError {
    #[error("invalid metric at {at}: {reason}")]
    InvalidMetric { at: String, reason: String },

    #[error("direction vector must be nonzero")]
    ZeroDirection,

    #[error("geodesic did not leave the domain within time budget {budget}")]
    NonExit { budget: f64 },

    #[error("two-point shooting failed after {iterations} iterations (miss distance {miss:e})")]
    Connectivity { iterations: usize, miss: f64 },

    #[error("chart center too close to the boundary: radius {radius:e}")]
    ChartRadius { radius: f64 },

    #[error("chart invariant violated: {0}")]
    Chart(String),

    #[error("value out of range: {0}")]
    Range(String),

    #[error("source exponent {exponent} is below 6; boundary vanishing would be too weak")]
    Smoothness { exponent: u32 },

    #[error("window too small: |u| = {tail:e} at the edge of the xi1 window")]
    WindowTooSmall { tail: f64 },

    #[error("eta = {eta} lies within one grid spacing of the excluded point 0")]
    ExcludedPoint { eta: f64 },

    #[error("fit window holds {found} points per side, need at least {needed}")]
    Window { found: usize, needed: usize },

    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, GeoError>;

impl GeoError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        GeoError::Io {
            path: path.into(),
            source,
        }
    }
}
