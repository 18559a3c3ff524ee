use serde::{Deserialize, Serialize};

use super::camera::unproject_pixel;
use super::plane::{fit_plane_ransac, RansacConfig};
use super::{CameraIntrinsics, CameraPose, DepthImage, GeometryError, Vec3};
use crate::bbox::BoundingBox;

/// Pose of a functional element: centre point plus unit interaction normal.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PoseRepr", into = "PoseRepr")]
pub struct ElementPose {
    center: Vec3,
    normal: Vec3,
}

#[derive(Serialize, Deserialize)]
struct PoseRepr {
    center: [f64; 3],
    normal: [f64; 3],
}

impl TryFrom<PoseRepr> for ElementPose {
    type Error = GeometryError;

    fn try_from(r: PoseRepr) -> Result<Self, Self::Error> {
        let normal = Vec3::from(r.normal);
        if (normal.norm() - 1.0).abs() > 1e-6 {
            return Err(GeometryError::ZeroNormal);
        }
        ElementPose::new(Vec3::from(r.center), normal)
    }
}

impl From<ElementPose> for PoseRepr {
    fn from(p: ElementPose) -> Self {
        PoseRepr { center: p.center.into(), normal: p.normal.into() }
    }
}

impl ElementPose {
    /// Builds a pose, normalizing `normal`.
    pub fn new(center: Vec3, normal: Vec3) -> Result<Self, GeometryError> {
        if !center.iter().chain(normal.iter()).all(|v| v.is_finite()) {
            return Err(GeometryError::ZeroNormal);
        }
        let normal = normal.try_normalize(1e-12).ok_or(GeometryError::ZeroNormal)?;
        Ok(Self { center, normal })
    }

    pub fn center(&self) -> Vec3 {
        self.center
    }

    pub fn normal(&self) -> Vec3 {
        self.normal
    }
}

/// Angle between two vectors in radians, clamped against rounding.
pub fn angle_between(a: &Vec3, b: &Vec3) -> f64 {
    let c = a.dot(b) / (a.norm() * b.norm());
    c.clamp(-1.0, 1.0).acos()
}

/// Equal-weight average of per-viewpoint poses; the mean normal is
/// renormalized to unit length.
pub fn average_poses(poses: &[ElementPose]) -> Result<ElementPose, GeometryError> {
    let first = poses.first().ok_or(GeometryError::EmptyInput)?;
    for (index, p) in poses.iter().enumerate().skip(1) {
        if p.normal.dot(&first.normal) < 0.0 {
            let angle_deg = angle_between(&p.normal, &first.normal).to_degrees();
            return Err(GeometryError::InconsistentOrientation { index, angle_deg });
        }
    }
    let n = poses.len() as f64;
    let center = poses.iter().map(|p| p.center).sum::<Vec3>() / n;
    let normal = poses.iter().map(|p| p.normal).sum::<Vec3>() / n;
    ElementPose::new(center, normal)
}

/// Median of the valid depths in the 3x3 neighbourhood of pixel `(u, v)`.
fn center_depth(depth: &DepthImage, u: usize, v: usize) -> Option<f64> {
    let mut vals: Vec<f64> = (v.saturating_sub(1)..=v + 1)
        .flat_map(|y| (u.saturating_sub(1)..=u + 1).map(move |x| (x, y)))
        .filter_map(|(x, y)| depth.get(x, y))
        .collect();
    if vals.is_empty() {
        return None;
    }
    vals.sort_by(f64::total_cmp);
    let m = vals.len() / 2;
    Some(if vals.len() % 2 == 1 { vals[m] } else { 0.5 * (vals[m - 1] + vals[m]) })
}

/// Single-view element pose from a detection box and a depth image.
///
/// The centre is the box centre unprojected with the 3x3-median depth; the
/// normal is the RANSAC plane through all valid box pixels, facing the camera.
pub fn estimate_element_pose(
    bbox: &BoundingBox,
    depth: &DepthImage,
    intr: &CameraIntrinsics,
    cam: &CameraPose,
    ransac: &RansacConfig,
) -> Result<ElementPose, GeometryError> {
    if depth.width() != intr.width || depth.height() != intr.height {
        return Err(GeometryError::InvalidDepthImage(format!(
            "depth is {}x{}, camera is {}x{}",
            depth.width(),
            depth.height(),
            intr.width,
            intr.height
        )));
    }
    if !bbox.is_valid() || !bbox.within(intr.width, intr.height) {
        let (u, v) = bbox.center();
        return Err(GeometryError::OutOfBounds { u, v, width: intr.width, height: intr.height });
    }

    let (cu, cv) = bbox.center();
    let d = center_depth(depth, cu.round() as usize, cv.round() as usize)
        .ok_or(GeometryError::NoValidDepth)?;
    let center = unproject_pixel((cu, cv), d, intr, cam)?;

    let (u0, u1) = (bbox.x1.ceil() as usize, bbox.x2.floor() as usize);
    let (v0, v1) = (bbox.y1.ceil() as usize, bbox.y2.floor() as usize);
    let mut points = Vec::with_capacity((u1 + 1 - u0) * (v1 + 1 - v0));
    for v in v0..=v1 {
        for u in u0..=u1 {
            if let Some(z) = depth.get(u, v) {
                points.push(unproject_pixel((u as f64, v as f64), z, intr, cam)?);
            }
        }
    }
    if points.len() < 3 {
        return Err(GeometryError::InsufficientPoints { got: points.len(), need: 3 });
    }
    let fit = fit_plane_ransac(&points, ransac, Some(&cam.position()))?;
    ElementPose::new(center, fit.normal)
}
