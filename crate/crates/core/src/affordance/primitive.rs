use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::descriptor::{AffordanceDescriptor, Arrangement, SymbolHint};
use super::AffordanceError;
use crate::geometry::{ElementPose, Vec3};

const AXIS_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MotionType {
    Rotation,
    Translation,
}

impl std::fmt::Display for MotionType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            MotionType::Rotation => "rotation",
            MotionType::Translation => "translation",
        })
    }
}

/// A motion type applied along `axis` at `origin`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PrimitiveRepr", into = "PrimitiveRepr")]
pub struct MotionPrimitive {
    motion_type: MotionType,
    axis: Vec3,
    origin: Vec3,
}

#[derive(Serialize, Deserialize)]
struct PrimitiveRepr {
    #[serde(rename = "type")]
    motion_type: MotionType,
    axis: [f64; 3],
    origin: [f64; 3],
}

impl TryFrom<PrimitiveRepr> for MotionPrimitive {
    type Error = AffordanceError;

    fn try_from(r: PrimitiveRepr) -> Result<Self, Self::Error> {
        Self::new(r.motion_type, Vector3::from(r.axis), Vector3::from(r.origin))
    }
}

impl From<MotionPrimitive> for PrimitiveRepr {
    fn from(p: MotionPrimitive) -> Self {
        PrimitiveRepr { motion_type: p.motion_type, axis: p.axis.into(), origin: p.origin.into() }
    }
}

impl MotionPrimitive {
    /// Fails unless `axis` is unit length to within 1e-9.
    pub fn new(motion_type: MotionType, axis: Vec3, origin: Vec3) -> Result<Self, AffordanceError> {
        if !axis.iter().chain(origin.iter()).all(|c| c.is_finite()) {
            return Err(AffordanceError::InvalidPrimitive("non-finite component".into()));
        }
        if (axis.norm() - 1.0).abs() > AXIS_TOL {
            return Err(AffordanceError::InvalidPrimitive(format!(
                "axis norm {} is not 1",
                axis.norm()
            )));
        }
        Ok(Self { motion_type, axis, origin })
    }

    pub fn motion_type(&self) -> MotionType {
        self.motion_type
    }

    pub fn axis(&self) -> &Vec3 {
        &self.axis
    }

    pub fn origin(&self) -> &Vec3 {
        &self.origin
    }
}

/// Non-empty ordered list of primitives for one element.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(transparent)]
pub struct PrimitiveSet(Vec<MotionPrimitive>);

impl PrimitiveSet {
    pub fn new(primitives: Vec<MotionPrimitive>) -> Result<Self, AffordanceError> {
        if primitives.is_empty() {
            return Err(AffordanceError::InvalidPrimitive("empty primitive set".into()));
        }
        Ok(Self(primitives))
    }

    pub fn as_slice(&self) -> &[MotionPrimitive] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn into_vec(self) -> Vec<MotionPrimitive> {
        self.0
    }
}

impl<'de> Deserialize<'de> for PrimitiveSet {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = Vec::<MotionPrimitive>::deserialize(d)?;
        PrimitiveSet::new(v).map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "OffsetsRepr", into = "OffsetsRepr")]
pub struct GripperOffsets {
    delta_y: f64,
    delta_z: f64,
}

#[derive(Serialize, Deserialize)]
struct OffsetsRepr {
    delta_y: f64,
    delta_z: f64,
}

impl TryFrom<OffsetsRepr> for GripperOffsets {
    type Error = AffordanceError;
    fn try_from(r: OffsetsRepr) -> Result<Self, Self::Error> {
        Self::new(r.delta_y, r.delta_z)
    }
}

impl From<GripperOffsets> for OffsetsRepr {
    fn from(o: GripperOffsets) -> Self {
        OffsetsRepr { delta_y: o.delta_y, delta_z: o.delta_z }
    }
}

impl Default for GripperOffsets {
    fn default() -> Self {
        Self { delta_y: 0.03, delta_z: 0.03 }
    }
}

impl GripperOffsets {
    pub fn new(delta_y: f64, delta_z: f64) -> Result<Self, AffordanceError> {
        if !(delta_y > 0.0 && delta_z > 0.0 && delta_y.is_finite() && delta_z.is_finite()) {
            return Err(AffordanceError::InvalidOffsets(delta_y, delta_z));
        }
        Ok(Self { delta_y, delta_z })
    }

    pub fn delta_y(&self) -> f64 {
        self.delta_y
    }

    pub fn delta_z(&self) -> f64 {
        self.delta_z
    }
}

/// In-plane horizontal and vertical unit vectors `(ŷ, ẑ)` for a switch with
/// normal `n`. ẑ is world up projected onto the plane; ŷ = n × ẑ.
pub fn switch_plane_axes(normal: &Vec3) -> (Vec3, Vec3) {
    let n = normal.normalize();
    let up = Vector3::z();
    let mut z = up - n * n.dot(&up);
    if z.norm() < 1e-9 {
        // Horizontal surface: fall back to world x as the reference direction.
        let x = Vector3::x();
        z = x - n * n.dot(&x);
    }
    let z = z.normalize();
    let y = n.cross(&z).normalize();
    (y, z)
}

/// Offset multipliers along the arrangement axis: a pair sits at ±δ, larger
/// groups at `{-(n-1)/2, ..., (n-1)/2}`·δ.
fn button_steps(n: u32) -> Vec<f64> {
    if n == 2 {
        return vec![-1.0, 1.0];
    }
    let half = (n as f64 - 1.0) / 2.0;
    (0..n).map(|j| j as f64 - half).collect()
}

/// Turn a descriptor into executable primitives at the element's pose.
pub fn primitives_from_descriptor(
    desc: &AffordanceDescriptor,
    pose: &ElementPose,
    offsets: &GripperOffsets,
) -> Result<PrimitiveSet, AffordanceError> {
    let motion_type = desc.switch_type().motion_type().ok_or(AffordanceError::ToggleUnsupported)?;
    let n = pose.normal();
    let rc = pose.center();
    let (y_hat, z_hat) = switch_plane_axes(&n);

    let layout: Vec<Vec3> = match desc.arrangement() {
        Arrangement::Single => vec![Vec3::zeros()],
        Arrangement::SideBySide => button_steps(desc.button_count())
            .into_iter()
            .map(|k| y_hat * (k * offsets.delta_y))
            .collect(),
        Arrangement::StackedVertically => button_steps(desc.button_count())
            .into_iter()
            .map(|k| z_hat * (k * offsets.delta_z))
            .collect(),
    };

    let symbol: Vec<Vec3> = match desc.symbol_hint() {
        SymbolHint::None => vec![Vec3::zeros()],
        SymbolHint::TopBottomPush => vec![z_hat * offsets.delta_z, -z_hat * offsets.delta_z],
    };

    let mut out = Vec::with_capacity(layout.len() * symbol.len());
    for a in &layout {
        for s in &symbol {
            out.push(MotionPrimitive::new(motion_type, n, rc + a + s)?);
        }
    }
    PrimitiveSet::new(out)
}
