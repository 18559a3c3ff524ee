//! Camera model, depth images, plane fitting and element poses.

mod camera;
mod depth;
mod pca;
mod plane;
mod pose;

use thiserror::Error;

pub use camera::{project_point, unproject_pixel, CameraIntrinsics, CameraPose};
pub use depth::{DepthImage, DepthSidecar};
pub use pca::principal_axis;
pub use plane::{fit_plane_ransac, PlaneFit, RansacConfig};
pub use pose::{angle_between, average_poses, estimate_element_pose, ElementPose};

pub type Vec3 = nalgebra::Vector3<f64>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("depth must be finite and positive, got {0}")]
    NonPositiveDepth(f64),
    #[error("pixel ({u}, {v}) outside the {width}x{height} image")]
    OutOfBounds { u: f64, v: f64, width: usize, height: usize },
    #[error("need at least {need} usable points, got {got}")]
    InsufficientPoints { got: usize, need: usize },
    #[error("all sampled point triples were collinear")]
    DegenerateGeometry,
    #[error("no valid depth around the box center")]
    NoValidDepth,
    #[error("empty input")]
    EmptyInput,
    #[error("pose {index} normal deviates {angle_deg:.1} deg from the first (> 90)")]
    InconsistentOrientation { index: usize, angle_deg: f64 },
    #[error("point cloud is isotropic in its top two directions; principal axis undefined")]
    IsotropicCloud,
    #[error("invalid camera: {0}")]
    InvalidCamera(String),
    #[error("invalid depth image: {0}")]
    InvalidDepthImage(String),
    #[error("normal vector has zero length")]
    ZeroNormal,
}
