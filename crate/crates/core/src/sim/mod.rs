//! Seeded simulator standing in for robot, camera, detector, affordance
//! model and the hidden switch → lamp wiring.

mod env;
mod experiment;
mod explore;
mod scene;

use thiserror::Error;

pub use env::{
    build_sim_scene, closeup_viewpoints, observe_state_change, sim_intrinsics, InteractionOutcome, LampSnapshot,
    OutcomeKind, RenderedView, SimDetection, SimEnvironment, SimOracle, Viewpoint, AXIS_TOLERANCE_DEG,
    CASING_HALF_SIZE_M, CLOSEUP_ARC_DEG, CLOSEUP_DISTANCE_M, DEFAULT_TOLERANCE_M, MISS_REFERENCE_DISTANCE_M,
    OUTLINE_WIDTH_M,
};
pub use experiment::{run_success_experiment, ExperimentConfig, ExperimentReport};
pub use explore::{
    ground_truth_graph, run_exploration, true_edges, ExplorationLogEntry, ExplorationPolicy, Observation,
    VisitOrder,
};
pub use scene::{LampSpec, NoiseConfig, SimSceneSpec, SwitchSpec, WiringEntry};

use crate::graph::GraphError;
use crate::pipeline::ConfigError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid scene spec at {path}: {message}")]
    InvalidSpec { path: String, message: String },
    #[error("unknown switch index {0}")]
    UnknownSwitch(usize),
    #[error("unknown lamp {0:?}")]
    UnknownLamp(String),
    #[error("rendering failed: {0}")]
    Render(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("pipeline error: {0}")]
    Pipeline(String),
}
