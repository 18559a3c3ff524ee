//! Interaction with small functional elements (light switches, door handles)
//! from RGB-D observations.
//!
//! The crate is organised along the processing chain:
//!
//! - [`geometry`]: pinhole camera, depth images, RANSAC plane fitting, element
//!   poses and multi-view averaging.
//! - [`refine`]: line maps, distance transforms and the bounding-box
//!   refinement that snaps detector boxes to edge features.
//! - [`affordance`]: affordance descriptors, oracle clients and the
//!   descriptor → motion primitive translation.
//! - [`motion`]: revolute/prismatic classification for doors and drawers and
//!   the swing-door opening trajectory.
//! - [`graph`]: the scene graph world model and its interaction update rule.
//! - [`sim`]: a seeded simulator standing in for robot, camera, detector and
//!   wiring, plus the exploration loop and success-rate experiments.
//! - [`metrics`]: success-rate confidence intervals and detection metrics.
//! - [`pipeline`]: application configuration and the end-to-end single
//!   attempt driver.

pub mod affordance;
pub mod bbox;
pub mod error;
pub mod geometry;
pub mod graph;
pub mod metrics;
pub mod motion;
pub mod pipeline;
pub mod refine;
pub mod rng;
pub mod sim;

mod serde_vec;

pub use bbox::BoundingBox;
pub use error::{Error, Result};
pub use geometry::{CameraIntrinsics, CameraPose, DepthImage, ElementPose, PlaneFit, Vec3};
