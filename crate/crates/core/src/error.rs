use chrono::{DateTime, Utc};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("schema error: {0}")]
    Schema(String),

    #[error("no parseable rows in {0}")]
    EmptyInput(String),

    #[error("duplicate timestamp {0}")]
    DuplicateTimestamp(DateTime<Utc>),

    #[error("resolution error: {0}")]
    Resolution(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("out of range: {0}")]
    Range(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("mesh error: {0}")]
    Mesh(String),

    #[error("factorization failed: matrix not positive definite at pivot {pivot}")]
    Factorization { pivot: usize },

    #[error("point ({east:.3}, {north:.3}) km lies outside the mesh")]
    Coverage { east: f64, north: f64 },

    #[error("{count} grid cell(s) outside the mesh: {cells}")]
    GridCoverage { count: usize, cells: String },

    #[error("fit did not converge after {iterations} iterations (|grad|_inf = {grad_norm:.3e})")]
    Fit {
        iterations: usize,
        grad_norm: f64,
        last: Vec<f64>,
    },

    #[error("ill-conditioned system: {0}")]
    Conditioning(String),

    #[error("size error: {0}")]
    Size(String),

    #[error("alignment error: {0}")]
    Alignment(String),

    #[error("input error: {0}")]
    Input(String),

    #[error("artifact format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
