use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use super::{GeometryError, Vec3};

/// Pinhole intrinsics. Pixel centres are at integer coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

impl CameraIntrinsics {
    pub fn validate(&self) -> Result<(), GeometryError> {
        let ok = self.fx > 0.0
            && self.fy > 0.0
            && self.cx >= 0.0
            && self.cx < self.width as f64
            && self.cy >= 0.0
            && self.cy < self.height as f64;
        if ok {
            Ok(())
        } else {
            Err(GeometryError::InvalidCamera(format!(
                "intrinsics out of range: {self:?}"
            )))
        }
    }

    pub fn contains(&self, u: f64, v: f64) -> bool {
        u >= 0.0 && v >= 0.0 && u < self.width as f64 && v < self.height as f64
    }
}

/// Rigid transform from the camera frame to the world frame.
///
/// The camera frame is x right, y down, z along the optical axis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CameraPoseRepr", into = "CameraPoseRepr")]
pub struct CameraPose {
    rotation: Matrix3<f64>,
    translation: Vec3,
}

#[derive(Serialize, Deserialize)]
struct CameraPoseRepr {
    /// Row-major 3x3.
    rotation: [[f64; 3]; 3],
    translation: [f64; 3],
}

impl TryFrom<CameraPoseRepr> for CameraPose {
    type Error = GeometryError;

    fn try_from(r: CameraPoseRepr) -> Result<Self, Self::Error> {
        let m = Matrix3::from_fn(|i, j| r.rotation[i][j]);
        CameraPose::new(m, Vec3::from(r.translation))
    }
}

impl From<CameraPose> for CameraPoseRepr {
    fn from(p: CameraPose) -> Self {
        let r = &p.rotation;
        CameraPoseRepr {
            rotation: [
                [r[(0, 0)], r[(0, 1)], r[(0, 2)]],
                [r[(1, 0)], r[(1, 1)], r[(1, 2)]],
                [r[(2, 0)], r[(2, 1)], r[(2, 2)]],
            ],
            translation: [p.translation.x, p.translation.y, p.translation.z],
        }
    }
}

const ORTHONORMAL_TOL: f64 = 1e-6;

impl CameraPose {
    pub fn new(rotation: Matrix3<f64>, translation: Vec3) -> Result<Self, GeometryError> {
        let err = (rotation.transpose() * rotation - Matrix3::identity()).abs().max();
        let det = rotation.determinant();
        if !(err <= ORTHONORMAL_TOL) || (det - 1.0).abs() > ORTHONORMAL_TOL {
            return Err(GeometryError::InvalidCamera(format!(
                "rotation is not a proper rotation (orthogonality error {err:.2e}, det {det:.6})"
            )));
        }
        if !translation.iter().all(|v| v.is_finite()) {
            return Err(GeometryError::InvalidCamera("non-finite translation".into()));
        }
        Ok(Self { rotation, translation })
    }

    pub fn identity() -> Self {
        Self { rotation: Matrix3::identity(), translation: Vec3::zeros() }
    }

    /// Camera at `eye` looking at `target`; image "up" follows `up` as closely
    /// as possible.
    pub fn look_at(eye: Vec3, target: Vec3, up: Vec3) -> Result<Self, GeometryError> {
        let z = (target - eye)
            .try_normalize(1e-12)
            .ok_or_else(|| GeometryError::InvalidCamera("eye coincides with target".into()))?;
        let x = z
            .cross(&up)
            .try_normalize(1e-12)
            .ok_or_else(|| GeometryError::InvalidCamera("viewing direction parallel to up".into()))?;
        let y = z.cross(&x);
        let rotation = Matrix3::from_columns(&[x, y, z]);
        Self::new(rotation, eye)
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vec3 {
        &self.translation
    }

    /// Camera centre in world coordinates.
    pub fn position(&self) -> Vec3 {
        self.translation
    }

    pub fn camera_to_world(&self, p: &Vec3) -> Vec3 {
        self.rotation * p + self.translation
    }

    pub fn world_to_camera(&self, p: &Vec3) -> Vec3 {
        self.rotation.transpose() * (p - self.translation)
    }
}

/// Back-projects pixel `(u, v)` at z-depth `depth` to a world point.
pub fn unproject_pixel(
    pixel: (f64, f64),
    depth: f64,
    intr: &CameraIntrinsics,
    cam: &CameraPose,
) -> Result<Vec3, GeometryError> {
    let (u, v) = pixel;
    if !intr.contains(u, v) {
        return Err(GeometryError::OutOfBounds { u, v, width: intr.width, height: intr.height });
    }
    if !(depth.is_finite() && depth > 0.0) {
        return Err(GeometryError::NonPositiveDepth(depth));
    }
    let p = Vec3::new((u - intr.cx) * depth / intr.fx, (v - intr.cy) * depth / intr.fy, depth);
    Ok(cam.camera_to_world(&p))
}

/// Projects a world point; `None` when it is behind (or on) the camera plane.
/// The result may lie outside the image.
pub fn project_point(p: &Vec3, intr: &CameraIntrinsics, cam: &CameraPose) -> Option<(f64, f64)> {
    let c = cam.world_to_camera(p);
    if c.z <= 0.0 {
        return None;
    }
    Some((intr.fx * c.x / c.z + intr.cx, intr.fy * c.y / c.z + intr.cy))
}
