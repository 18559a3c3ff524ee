//! Swing doors and drawers: revolute/prismatic classification, hinge and
//! lever computation, and the circular opening trajectory.

use std::f64::consts::FRAC_PI_2;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::affordance::{AffordanceError, MotionPrimitive, MotionType};
use crate::geometry::{principal_axis, GeometryError, Vec3};

/// Lateral offset, as a fraction of the front half-width, above which a
/// handle counts as eccentric.
pub const ECCENTRICITY_RATIO: f64 = 0.25;
/// Containment slack, as a fraction of the front box's largest half-extent.
pub const CONTAINMENT_TOLERANCE: f64 = 0.1;
pub const DEFAULT_TRAJECTORY_STEPS: usize = 20;

const ORTHONORMAL_TOL: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MotionError {
    #[error("invalid box: {0}")]
    InvalidBox(String),
    #[error("handle centre lies outside the front box")]
    HandleOutsideFront,
    #[error("handle is concentric with the front; not a revolute door")]
    NotRevolute,
    #[error("opening angle {0} outside [0, pi/2]")]
    AngleOutOfRange(f64),
    #[error("lever must be positive, got {0}")]
    NonPositiveLever(f64),
    #[error("need at least 2 trajectory steps, got {0}")]
    TooFewSteps(usize),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Primitive(#[from] AffordanceError),
}

/// Oriented box. Columns of `orientation` are the box axes in world
/// coordinates; `half_extents[i]` is measured along column `i`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BoxRepr", into = "BoxRepr")]
pub struct Box3D {
    center: Vec3,
    half_extents: Vec3,
    orientation: Matrix3<f64>,
}

#[derive(Serialize, Deserialize)]
struct BoxRepr {
    center: [f64; 3],
    half_extents: [f64; 3],
    /// Row-major; identity when omitted.
    #[serde(default = "identity_rows")]
    orientation: [[f64; 3]; 3],
}

fn identity_rows() -> [[f64; 3]; 3] {
    [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]
}

impl TryFrom<BoxRepr> for Box3D {
    type Error = MotionError;
    fn try_from(r: BoxRepr) -> Result<Self, Self::Error> {
        Box3D::new(
            Vector3::from(r.center),
            Vector3::from(r.half_extents),
            Matrix3::from_fn(|i, j| r.orientation[i][j]),
        )
    }
}

impl From<Box3D> for BoxRepr {
    fn from(b: Box3D) -> Self {
        let o = &b.orientation;
        BoxRepr {
            center: b.center.into(),
            half_extents: b.half_extents.into(),
            orientation: [0, 1, 2].map(|i| [o[(i, 0)], o[(i, 1)], o[(i, 2)]]),
        }
    }
}

impl Box3D {
    pub fn new(center: Vec3, half_extents: Vec3, orientation: Matrix3<f64>) -> Result<Self, MotionError> {
        if !center.iter().all(|c| c.is_finite()) {
            return Err(MotionError::InvalidBox("non-finite centre".into()));
        }
        if !half_extents.iter().all(|h| *h > 0.0 && h.is_finite()) {
            return Err(MotionError::InvalidBox(format!(
                "half extents must be positive, got {:?}",
                half_extents.as_slice()
            )));
        }
        let err = (orientation.transpose() * orientation - Matrix3::identity()).abs().max();
        if !(err <= ORTHONORMAL_TOL) {
            return Err(MotionError::InvalidBox(format!("orientation not orthonormal (error {err:.2e})")));
        }
        Ok(Self { center, half_extents, orientation })
    }

    pub fn axis_aligned(center: Vec3, half_extents: Vec3) -> Result<Self, MotionError> {
        Self::new(center, half_extents, Matrix3::identity())
    }

    pub fn center(&self) -> &Vec3 {
        &self.center
    }

    pub fn half_extents(&self) -> &Vec3 {
        &self.half_extents
    }

    pub fn orientation(&self) -> &Matrix3<f64> {
        &self.orientation
    }

    pub fn axis(&self, i: usize) -> Vec3 {
        self.orientation.column(i).into_owned()
    }

    pub fn corners(&self) -> [Vec3; 8] {
        let mut out = [Vec3::zeros(); 8];
        for (k, c) in out.iter_mut().enumerate() {
            let s = |bit: usize| if k >> bit & 1 == 1 { 1.0 } else { -1.0 };
            *c = self.center
                + self.axis(0) * (s(0) * self.half_extents.x)
                + self.axis(1) * (s(1) * self.half_extents.y)
                + self.axis(2) * (s(2) * self.half_extents.z);
        }
        out
    }
}

/// Roles of a front box's axes: (vertical, lateral, thickness) column indices.
fn front_roles(front: &Box3D) -> (usize, usize, usize) {
    let up = Vector3::z();
    let vertical = (0..3)
        .max_by(|&a, &b| front.axis(a).dot(&up).abs().total_cmp(&front.axis(b).dot(&up).abs()))
        .unwrap_or(2);
    let others: Vec<usize> = (0..3).filter(|&i| i != vertical).collect();
    let (a, b) = (others[0], others[1]);
    let h = front.half_extents();
    if h[a] >= h[b] {
        (vertical, a, b)
    } else {
        (vertical, b, a)
    }
}

struct FrontLocal {
    vertical: usize,
    lateral: usize,
    thickness: usize,
    offset: Vec3,
}

fn locate_handle(handle: &Box3D, front: &Box3D) -> Result<FrontLocal, MotionError> {
    let (vertical, lateral, thickness) = front_roles(front);
    let offset = front.orientation().transpose() * (handle.center() - front.center());
    let slack = CONTAINMENT_TOLERANCE * front.half_extents().max();
    if (0..3).any(|i| offset[i].abs() > front.half_extents()[i] + slack) {
        return Err(MotionError::HandleOutsideFront);
    }
    Ok(FrontLocal { vertical, lateral, thickness, offset })
}

/// Rotation for a handle placed eccentrically in the front (door), translation
/// otherwise (drawer).
pub fn classify_interaction(handle: &Box3D, front: &Box3D) -> Result<MotionType, MotionError> {
    let loc = locate_handle(handle, front)?;
    let half_width = front.half_extents()[loc.lateral];
    if loc.offset[loc.lateral].abs() > ECCENTRICITY_RATIO * half_width {
        Ok(MotionType::Rotation)
    } else {
        Ok(MotionType::Translation)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RotationSense {
    #[serde(rename = "+", alias = "positive")]
    Positive,
    #[serde(rename = "-", alias = "negative")]
    Negative,
}

impl RotationSense {
    pub fn sign(self) -> f64 {
        match self {
            RotationSense::Positive => 1.0,
            RotationSense::Negative => -1.0,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            RotationSense::Positive => RotationSense::Negative,
            RotationSense::Negative => RotationSense::Positive,
        }
    }
}

impl std::str::FromStr for RotationSense {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "+" | "positive" | "+1" => Ok(RotationSense::Positive),
            "-" | "negative" | "-1" => Ok(RotationSense::Negative),
            other => Err(format!("unknown rotation sense {other:?}")),
        }
    }
}

/// Revolute opening motion for a swing door.
///
/// Frame G is anchored at the handle: x points into the door (the gripper's
/// approach direction, so the opening motion −l·sin α moves toward the
/// robot), z is up along the hinge, y = z × x. The hinge line passes through
/// `(0, −s·l, 0)` in G.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DoorPrimitive {
    pub base: MotionPrimitive,
    #[serde(with = "crate::serde_vec::vec3")]
    pub hinge_axis_point: Vec3,
    pub lever: f64,
    pub rotation_sense: RotationSense,
    #[serde(with = "crate::serde_vec::vec3")]
    pub gripper_roll_axis: Vec3,
    /// Columns are the x, y, z axes of frame G in world coordinates.
    pub frame_g: Matrix3<f64>,
}

impl DoorPrimitive {
    pub fn handle_center(&self) -> Vec3 {
        *self.base.origin()
    }

    /// Hinge direction (unit, upward).
    pub fn hinge_direction(&self) -> Vec3 {
        self.frame_g.column(2).into_owned()
    }

    /// Distance from `p` to the hinge line.
    pub fn distance_to_hinge(&self, p: &Vec3) -> f64 {
        let d = self.hinge_direction();
        let r = p - self.hinge_axis_point;
        (r - d * r.dot(&d)).norm()
    }
}

/// Hinge on the vertical front edge farthest from the handle, origin at the
/// handle centre, roll axis from the handle's point cloud.
pub fn build_door_primitive(
    handle: &Box3D,
    front: &Box3D,
    handle_points: &[Vec3],
) -> Result<DoorPrimitive, MotionError> {
    if classify_interaction(handle, front)? != MotionType::Rotation {
        return Err(MotionError::NotRevolute);
    }
    let loc = locate_handle(handle, front)?;
    let e_lat = front.axis(loc.lateral);
    let e_thick = front.axis(loc.thickness);
    let mut up = front.axis(loc.vertical);
    if up.z < 0.0 {
        up = -up;
    }

    let d_lat = loc.offset[loc.lateral];
    let half_width = front.half_extents()[loc.lateral];
    let side = d_lat.signum();
    let handle_c = *handle.center();
    // Hinge at the handle's height and depth, on the opposite lateral edge.
    let hinge_point = handle_c + e_lat * (-side * half_width - d_lat);
    let lever = half_width + d_lat.abs();

    // The handle protrudes from the front, so the front centre lies inward.
    let d_thick = loc.offset[loc.thickness];
    let outward = if d_thick < 0.0 { -e_thick } else { e_thick };
    let x = -outward;
    let z = up;
    let y = z.cross(&x);

    let toward_hinge = hinge_point - handle_c;
    let rotation_sense =
        if toward_hinge.dot(&y) < 0.0 { RotationSense::Positive } else { RotationSense::Negative };

    let roll = principal_axis(handle_points)?;
    let base = MotionPrimitive::new(MotionType::Rotation, z * rotation_sense.sign(), handle_c)?;
    Ok(DoorPrimitive {
        base,
        hinge_axis_point: hinge_point,
        lever,
        rotation_sense,
        gripper_roll_axis: roll,
        frame_g: Matrix3::from_columns(&[x, y, z]),
    })
}

/// Handle displacement in frame G after opening by `alpha`:
/// `−l·[sin α, s·(1 − cos α), 0]`.
pub fn swing_trajectory_point(lever: f64, alpha: f64, sense: RotationSense) -> Result<Vec3, MotionError> {
    if !(lever > 0.0 && lever.is_finite()) {
        return Err(MotionError::NonPositiveLever(lever));
    }
    if !(0.0..=FRAC_PI_2).contains(&alpha) {
        return Err(MotionError::AngleOutOfRange(alpha));
    }
    let s = sense.sign();
    Ok(-lever * Vector3::new(alpha.sin(), s * (1.0 - alpha.cos()), 0.0))
}

/// World-frame waypoints at evenly spaced angles from closed to π/2.
pub fn sample_trajectory(door: &DoorPrimitive, n_steps: usize) -> Result<Vec<Vec3>, MotionError> {
    if n_steps < 2 {
        return Err(MotionError::TooFewSteps(n_steps));
    }
    let c = door.handle_center();
    (0..n_steps)
        .map(|k| {
            let alpha = if k + 1 == n_steps { FRAC_PI_2 } else { k as f64 / (n_steps - 1) as f64 * FRAC_PI_2 };
            Ok(c + door.frame_g * swing_trajectory_point(door.lever, alpha, door.rotation_sense)?)
        })
        .collect()
}
