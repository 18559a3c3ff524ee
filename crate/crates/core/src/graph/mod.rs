//! Scene graph: vertices for lamps, switches and doors, "controls" edges, and
//! the update rules driven by detections and interaction results.

mod cluster;

use std::collections::BTreeSet;
use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

pub use cluster::{cluster_detections, Cluster, Detection3D, DEFAULT_CLUSTER_RADIUS};

use crate::affordance::{
    primitives_from_descriptor, AffordanceDescriptor, AffordanceError, GripperOffsets, MotionPrimitive,
};
use crate::geometry::{ElementPose, Vec3};

pub const CONTROLS: &str = "controls";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("unknown vertex {0:?}")]
    UnknownVertex(String),
    #[error("vertex {0:?} is not a switch")]
    NotASwitch(String),
    #[error("vertex {0:?} is not a lamp")]
    NotALamp(String),
    #[error("new switch at {position:?} lies {distance:.3} m from existing switch {existing:?}")]
    DuplicateRegistration { existing: String, position: [f64; 3], distance: f64 },
    #[error("duplicate vertex id {0:?}")]
    DuplicateId(String),
    #[error("invalid vertex {id:?}: {reason}")]
    InvalidVertex { id: String, reason: String },
    #[error("invalid edge {a:?} -> {b:?}: {reason}")]
    InvalidEdge { a: String, b: String, reason: String },
    #[error("invalid detection: {0}")]
    InvalidDetection(String),
    #[error("clustering radius must be positive, got {0}")]
    InvalidRadius(f64),
    #[error("schema violation at {path}: {message}")]
    SchemaViolation { path: String, message: String },
    #[error(transparent)]
    Affordance(#[from] AffordanceError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VertexClass {
    Switch,
    Lamp,
    SwingDoor,
    Other,
}

/// Binary lamp/switch state, or the opening angle of a door (radians).
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum VertexState {
    On,
    Off,
    None,
    DoorAngle(f64),
}

impl VertexState {
    pub fn toggled(self) -> Self {
        match self {
            VertexState::On => VertexState::Off,
            VertexState::Off => VertexState::On,
            other => other,
        }
    }
}

impl Serialize for VertexState {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            VertexState::On => s.serialize_str("on"),
            VertexState::Off => s.serialize_str("off"),
            VertexState::None => s.serialize_str("none"),
            VertexState::DoorAngle(a) => s.serialize_f64(*a),
        }
    }
}

impl<'de> Deserialize<'de> for VertexState {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Label(String),
            Angle(f64),
        }
        match Repr::deserialize(d)? {
            Repr::Label(l) => match l.as_str() {
                "on" => Ok(VertexState::On),
                "off" => Ok(VertexState::Off),
                "none" => Ok(VertexState::None),
                other => Err(serde::de::Error::custom(format!(
                    "unknown state {other:?}, expected on, off, none or an angle"
                ))),
            },
            Repr::Angle(a) => Ok(VertexState::DoorAngle(a)),
        }
    }
}

/// Observed effect of an interaction on one lamp.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StateChange {
    OffToOn,
    OnToOff,
    NoChange,
}

impl StateChange {
    pub const ALL: [StateChange; 3] = [StateChange::OffToOn, StateChange::OnToOff, StateChange::NoChange];

    pub fn between(before: bool, after: bool) -> Self {
        match (before, after) {
            (false, true) => StateChange::OffToOn,
            (true, false) => StateChange::OnToOff,
            _ => StateChange::NoChange,
        }
    }

    /// State implied after the change, if any.
    pub fn resulting_state(self) -> Option<VertexState> {
        match self {
            StateChange::OffToOn => Some(VertexState::On),
            StateChange::OnToOff => Some(VertexState::Off),
            StateChange::NoChange => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Vertex {
    pub id: String,
    pub class: VertexClass,
    pub pose: ElementPose,
    #[serde(default)]
    pub primitives: Vec<MotionPrimitive>,
    pub state: VertexState,
}

impl Vertex {
    pub fn switch(id: impl Into<String>, pose: ElementPose) -> Self {
        Self { id: id.into(), class: VertexClass::Switch, pose, primitives: Vec::new(), state: VertexState::None }
    }

    pub fn lamp(id: impl Into<String>, pose: ElementPose, on: bool) -> Self {
        Self {
            id: id.into(),
            class: VertexClass::Lamp,
            pose,
            primitives: Vec::new(),
            state: if on { VertexState::On } else { VertexState::Off },
        }
    }

    pub fn validate(&self) -> Result<(), GraphError> {
        let bad = |reason: &str| GraphError::InvalidVertex { id: self.id.clone(), reason: reason.into() };
        if self.id.is_empty() {
            return Err(bad("empty id"));
        }
        match (self.class, self.state) {
            (VertexClass::Lamp, VertexState::On | VertexState::Off) => Ok(()),
            (VertexClass::Lamp, _) => Err(bad("lamp state must be on or off")),
            (VertexClass::SwingDoor, VertexState::DoorAngle(a)) if (0.0..=FRAC_PI_2).contains(&a) => Ok(()),
            (VertexClass::SwingDoor, VertexState::None) => Ok(()),
            (VertexClass::SwingDoor, _) => Err(bad("door state must be an angle in [0, pi/2]")),
            (_, VertexState::DoorAngle(_)) => Err(bad("only doors carry an opening angle")),
            _ => Ok(()),
        }
    }

    pub fn is_controller(&self) -> bool {
        matches!(self.class, VertexClass::Switch | VertexClass::SwingDoor)
    }
}

/// Relation between a controlling element `a` and a controlled object `b`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Edge {
    pub a: String,
    pub b: String,
    #[serde(default = "default_relation")]
    pub relation: String,
}

fn default_relation() -> String {
    CONTROLS.to_string()
}

impl Edge {
    pub fn controls(a: impl Into<String>, b: impl Into<String>) -> Self {
        Self { a: a.into(), b: b.into(), relation: CONTROLS.into() }
    }
}

/// Vertices in insertion order plus an edge set.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct SceneGraph {
    vertices: Vec<Vertex>,
    edges: BTreeSet<Edge>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GraphRepr {
    vertices: Vec<Vertex>,
    #[serde(default)]
    edges: Vec<Edge>,
}

impl SceneGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    pub fn edges(&self) -> &BTreeSet<Edge> {
        &self.edges
    }

    pub fn vertex(&self, id: &str) -> Option<&Vertex> {
        self.vertices.iter().find(|v| v.id == id)
    }

    fn vertex_mut(&mut self, id: &str) -> Option<&mut Vertex> {
        self.vertices.iter_mut().find(|v| v.id == id)
    }

    pub fn vertices_of(&self, class: VertexClass) -> impl Iterator<Item = &Vertex> {
        self.vertices.iter().filter(move |v| v.class == class)
    }

    /// Lamps controlled by `switch_id`.
    pub fn controlled_by(&self, switch_id: &str) -> Vec<&str> {
        self.edges.iter().filter(|e| e.a == switch_id).map(|e| e.b.as_str()).collect()
    }

    pub fn has_edge(&self, a: &str, b: &str) -> bool {
        self.edges.iter().any(|e| e.a == a && e.b == b)
    }

    pub fn add_vertex(&mut self, v: Vertex) -> Result<(), GraphError> {
        v.validate()?;
        if self.vertex(&v.id).is_some() {
            return Err(GraphError::DuplicateId(v.id));
        }
        self.vertices.push(v);
        Ok(())
    }

    fn check_edge(&self, a: &str, b: &str) -> Result<(), GraphError> {
        let bad = |reason: &str| GraphError::InvalidEdge { a: a.into(), b: b.into(), reason: reason.into() };
        let va = self.vertex(a).ok_or_else(|| GraphError::UnknownVertex(a.into()))?;
        let vb = self.vertex(b).ok_or_else(|| GraphError::UnknownVertex(b.into()))?;
        if !va.is_controller() {
            return Err(bad("source must be a switch or door"));
        }
        if vb.is_controller() {
            return Err(bad("target must be a controlled object"));
        }
        Ok(())
    }

    /// Adds the edge unless an edge between `a` and `b` already exists.
    /// Returns whether the edge set changed.
    pub fn add_edge(&mut self, edge: Edge) -> Result<bool, GraphError> {
        self.check_edge(&edge.a, &edge.b)?;
        if self.has_edge(&edge.a, &edge.b) {
            return Ok(false);
        }
        Ok(self.edges.insert(edge))
    }

    pub fn set_state(&mut self, id: &str, state: VertexState) -> Result<(), GraphError> {
        let v = self.vertex_mut(id).ok_or_else(|| GraphError::UnknownVertex(id.into()))?;
        let mut next = v.clone();
        next.state = state;
        next.validate()?;
        *v = next;
        Ok(())
    }

    fn next_switch_id(&self, taken: &[String]) -> String {
        let mut k = self.vertices_of(VertexClass::Switch).count();
        loop {
            let id = format!("switch_{k}");
            if self.vertex(&id).is_none() && !taken.contains(&id) {
                return id;
            }
            k += 1;
        }
    }

    /// One switch vertex per cluster, in cluster order. Nothing is added if
    /// any cluster lands within `radius` of an existing switch.
    ///
    /// The representative's normal is used when present; otherwise +x is a
    /// placeholder until the vertex is refined.
    pub fn register_switches(&mut self, clusters: &[Cluster], radius: f64) -> Result<Vec<String>, GraphError> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(GraphError::InvalidRadius(radius));
        }
        let mut new = Vec::with_capacity(clusters.len());
        let mut ids = Vec::with_capacity(clusters.len());
        for c in clusters {
            let p = c.representative.position;
            for s in self.vertices_of(VertexClass::Switch) {
                let d = (s.pose.center() - p).norm();
                if d <= radius {
                    return Err(GraphError::DuplicateRegistration {
                        existing: s.id.clone(),
                        position: p.into(),
                        distance: d,
                    });
                }
            }
            let normal = c.representative.normal.map(Vec3::from).unwrap_or_else(Vec3::x);
            let pose = ElementPose::new(p, normal).map_err(|e| GraphError::InvalidDetection(e.to_string()))?;
            let id = self.next_switch_id(&ids);
            ids.push(id.clone());
            new.push(Vertex::switch(id, pose));
        }
        self.vertices.extend(new);
        Ok(ids)
    }

    /// Adds a `controls` edge and the new lamp state for every observed
    /// change. `NoChange` observations are ignored. Validates everything
    /// before mutating.
    pub fn apply_interaction_result(
        &mut self,
        switch_id: &str,
        observations: &[(String, StateChange)],
    ) -> Result<(), GraphError> {
        let s = self.vertex(switch_id).ok_or_else(|| GraphError::UnknownVertex(switch_id.into()))?;
        if s.class != VertexClass::Switch {
            return Err(GraphError::NotASwitch(switch_id.into()));
        }
        for (lamp, _) in observations {
            let l = self.vertex(lamp).ok_or_else(|| GraphError::UnknownVertex(lamp.clone()))?;
            if l.class != VertexClass::Lamp {
                return Err(GraphError::NotALamp(lamp.clone()));
            }
        }
        for (lamp, change) in observations {
            if let Some(state) = change.resulting_state() {
                self.add_edge(Edge::controls(switch_id, lamp.clone()))?;
                self.set_state(lamp, state)?;
            }
        }
        Ok(())
    }

    /// Replace a switch's pose and primitive set from a fresh descriptor.
    pub fn refine_switch_vertex(
        &mut self,
        switch_id: &str,
        desc: &AffordanceDescriptor,
        pose: ElementPose,
        offsets: &GripperOffsets,
    ) -> Result<(), GraphError> {
        let v = self.vertex(switch_id).ok_or_else(|| GraphError::UnknownVertex(switch_id.into()))?;
        if v.class != VertexClass::Switch {
            return Err(GraphError::NotASwitch(switch_id.into()));
        }
        let prims = primitives_from_descriptor(desc, &pose, offsets)?.into_vec();
        let v = self.vertex_mut(switch_id).expect("checked above");
        v.pose = pose;
        v.primitives = prims;
        Ok(())
    }

    /// Compact JSON, stable for a given graph.
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("scene graph serialization is infallible")
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("scene graph serialization is infallible")
    }

    pub fn from_json(text: &str) -> Result<Self, GraphError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let repr: GraphRepr = serde_path_to_error::deserialize(de).map_err(|e| GraphError::SchemaViolation {
            path: e.path().to_string(),
            message: e.inner().to_string(),
        })?;
        let mut g = SceneGraph::new();
        for (i, v) in repr.vertices.into_iter().enumerate() {
            g.add_vertex(v).map_err(|e| GraphError::SchemaViolation {
                path: format!("vertices[{i}]"),
                message: e.to_string(),
            })?;
        }
        for (i, e) in repr.edges.into_iter().enumerate() {
            let added = g.add_edge(e).map_err(|err| GraphError::SchemaViolation {
                path: format!("edges[{i}]"),
                message: err.to_string(),
            })?;
            if !added {
                return Err(GraphError::SchemaViolation {
                    path: format!("edges[{i}]"),
                    message: "duplicate edge".into(),
                });
            }
        }
        Ok(g)
    }
}

/// One labelled point of an environment cloud.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabeledPoint {
    #[serde(with = "crate::serde_vec::vec3")]
    pub position: Vec3,
    pub color: [u8; 3],
    pub label: u32,
}

/// Environment point cloud with labels in `1..=num_classes`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabeledPointCloud {
    pub num_classes: u32,
    pub points: Vec<LabeledPoint>,
}

impl LabeledPointCloud {
    pub fn validate(&self) -> Result<(), GraphError> {
        for (i, p) in self.points.iter().enumerate() {
            if p.label == 0 || p.label > self.num_classes {
                return Err(GraphError::SchemaViolation {
                    path: format!("points[{i}].label"),
                    message: format!("label {} outside 1..={}", p.label, self.num_classes),
                });
            }
        }
        Ok(())
    }

    pub fn points_with_label(&self, label: u32) -> impl Iterator<Item = &LabeledPoint> {
        self.points.iter().filter(move |p| p.label == label)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::affordance::SwitchType;
    use crate::bbox::BoundingBox;
    use nalgebra::Vector3;

    fn pose(x: f64) -> ElementPose {
        ElementPose::new(Vector3::new(x, 0.0, 1.0), Vector3::new(0.0, -1.0, 0.0)).unwrap()
    }

    fn lamps() -> SceneGraph {
        let mut g = SceneGraph::new();
        g.add_vertex(Vertex::lamp("lamp_0", pose(5.0), false)).unwrap();
        g.add_vertex(Vertex::lamp("lamp_1", pose(6.0), false)).unwrap();
        g
    }

    fn clusters(xs: &[f64]) -> Vec<Cluster> {
        let dets: Vec<Detection3D> = xs
            .iter()
            .map(|&x| Detection3D::new(Vector3::new(x, 0.0, 1.0), 0.9, "f", BoundingBox::new(0.0, 0.0, 1.0, 1.0)))
            .collect();
        cluster_detections(&dets, DEFAULT_CLUSTER_RADIUS).unwrap()
    }

    #[test]
    fn registration() {
        let mut g = SceneGraph::new();
        let ids = g.register_switches(&clusters(&[0.0, 1.0, 2.0]), 0.15).unwrap();
        assert_eq!(ids, ["switch_0", "switch_1", "switch_2"]);
        assert_eq!(g.vertices().len(), 3);
        assert!(g.edges().is_empty());
        let before = g.clone();
        assert!(matches!(
            g.register_switches(&clusters(&[0.0, 1.0, 2.0]), 0.15),
            Err(GraphError::DuplicateRegistration { .. })
        ));
        assert_eq!(g, before);

        let mut g = lamps();
        g.register_switches(&clusters(&[0.0]), 0.15).unwrap();
        assert_eq!(g.vertices().len(), 3);
        assert_eq!(g.vertex("lamp_0").unwrap().state, VertexState::Off);
    }

    #[test]
    fn interaction_updates() {
        let mut g = lamps();
        g.register_switches(&clusters(&[0.0]), 0.15).unwrap();
        let before = g.clone();
        g.apply_interaction_result("switch_0", &[("lamp_0".into(), StateChange::NoChange)]).unwrap();
        assert_eq!(g, before);

        let obs = [("lamp_0".to_string(), StateChange::OffToOn), ("lamp_1".to_string(), StateChange::OffToOn)];
        g.apply_interaction_result("switch_0", &obs).unwrap();
        assert!(g.has_edge("switch_0", "lamp_0") && g.has_edge("switch_0", "lamp_1"));
        assert_eq!(g.vertex("lamp_0").unwrap().state, VertexState::On);
        let once = g.clone();
        g.apply_interaction_result("switch_0", &obs).unwrap();
        assert_eq!(g, once);

        assert_eq!(
            g.apply_interaction_result("lamp_0", &[]),
            Err(GraphError::NotASwitch("lamp_0".into()))
        );
        assert_eq!(
            g.apply_interaction_result("switch_0", &[("switch_0".into(), StateChange::OffToOn)]),
            Err(GraphError::NotALamp("switch_0".into()))
        );
        assert_eq!(
            g.apply_interaction_result("nope", &[]),
            Err(GraphError::UnknownVertex("nope".into()))
        );
    }

    #[test]
    fn refinement_overwrites() {
        let mut g = SceneGraph::new();
        g.register_switches(&clusters(&[0.0]), 0.15).unwrap();
        let d = AffordanceDescriptor::single(SwitchType::PushButton);
        g.refine_switch_vertex("switch_0", &d, pose(0.01), &GripperOffsets::default()).unwrap();
        g.refine_switch_vertex("switch_0", &d, pose(0.01), &GripperOffsets::default()).unwrap();
        assert_eq!(g.vertex("switch_0").unwrap().primitives.len(), 1);
        assert!(matches!(
            g.refine_switch_vertex("x", &d, pose(0.0), &GripperOffsets::default()),
            Err(GraphError::UnknownVertex(_))
        ));
    }

    #[test]
    fn json_round_trip() {
        assert_eq!(SceneGraph::new().to_json(), r#"{"vertices":[],"edges":[]}"#);
        assert_eq!(SceneGraph::from_json(r#"{"vertices":[],"edges":[]}"#).unwrap(), SceneGraph::new());

        let mut g = lamps();
        g.register_switches(&clusters(&[0.0, 1.0]), 0.15).unwrap();
        g.apply_interaction_result("switch_1", &[("lamp_1".into(), StateChange::OffToOn)]).unwrap();
        let text = g.to_json();
        assert_eq!(SceneGraph::from_json(&text).unwrap(), g);
        assert_eq!(SceneGraph::from_json(&text).unwrap().to_json(), text);

        match SceneGraph::from_json(&text[..text.len() / 2]) {
            Err(GraphError::SchemaViolation { .. }) => {}
            other => panic!("expected schema violation, got {other:?}"),
        }
        let bad = text.replace("\"lamp_1\",\"relation\"", "\"lamp_9\",\"relation\"");
        match SceneGraph::from_json(&bad) {
            Err(GraphError::SchemaViolation { path, .. }) => assert_eq!(path, "edges[0]"),
            other => panic!("expected schema violation, got {other:?}"),
        }
        let bad = text.replacen("\"off\"", "\"dim\"", 1);
        match SceneGraph::from_json(&bad) {
            Err(GraphError::SchemaViolation { path, .. }) => assert!(path.starts_with("vertices[0]"), "{path}"),
            other => panic!("expected schema violation, got {other:?}"),
        }
    }
}
