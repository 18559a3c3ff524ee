use thiserror::Error;

use crate::affordance::AffordanceError;
use crate::geometry::GeometryError;
use crate::graph::GraphError;
use crate::metrics::MetricsError;
use crate::motion::MotionError;
use crate::pipeline::ConfigError;
use crate::refine::RefineError;
use crate::sim::SimError;

/// Crate-wide error, wrapping the per-module error types.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Refine(#[from] RefineError),
    #[error(transparent)]
    Affordance(#[from] AffordanceError),
    #[error(transparent)]
    Motion(#[from] MotionError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Short machine-readable kind, used for JSON error objects.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Geometry(_) => "geometry",
            Error::Refine(_) => "refine",
            Error::Affordance(_) => "affordance",
            Error::Motion(_) => "motion",
            Error::Graph(_) => "graph",
            Error::Sim(_) => "sim",
            Error::Metrics(_) => "metrics",
            Error::Config(_) => "config",
            Error::Io { .. } => "io",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
