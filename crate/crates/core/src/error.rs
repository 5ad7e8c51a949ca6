use std::path::PathBuf;

use crate::grid::CellIndex;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("cell {0:?} is at finest level")]
    AtFinestLevel(CellIndex),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("point ({x}, {xi}) lies outside cell [{x0}, {x1}] x [{xi0}, {xi1}]")]
    PointOutsideCell { x: f64, xi: f64, x0: f64, x1: f64, xi0: f64, xi1: f64 },

    #[error("two-scale basis is not orthonormal (deviation {0:e})")]
    NonOrthogonal(f64),

    #[error("leaf coefficients do not match the leaves of the tree: {0}")]
    LeafMismatch(String),

    #[error("leaves do not cover the stochastic domain at x = {x} (covered length {covered})")]
    NotCovering { x: f64, covered: f64 },

    #[error("inadmissible state in cell {cell:?} at t = {t}: {reason}")]
    Inadmissible { cell: CellIndex, t: f64, reason: String },

    #[error("non-positive time step {0:e}")]
    InvalidTimeStep(f64),

    #[error("domains do not match: {0}")]
    DomainMismatch(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// Process exit code used by the command line driver.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::DomainMismatch(_) => 2,
            Error::Inadmissible { .. } | Error::InvalidTimeStep(_) => 3,
            Error::Io { .. } => 4,
            _ => 1,
        }
    }
}
