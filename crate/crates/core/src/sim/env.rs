use std::collections::{BTreeMap, BTreeSet};

use image::GrayImage;
use nalgebra::{Rotation3, Vector3};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::scene::{NoiseConfig, SimSceneSpec};
use super::SimError;
use crate::affordance::{
    switch_plane_axes, AffordanceDescriptor, AffordanceError, AffordanceOracle, ElementRef, MotionPrimitive,
    SwitchType,
};
use crate::bbox::BoundingBox;
use crate::geometry::{angle_between, project_point, CameraIntrinsics, CameraPose, DepthImage, Vec3};
use crate::graph::StateChange;
use crate::rng::{stream_rng, Stream};

pub const DEFAULT_TOLERANCE_M: f64 = 0.015;
pub const AXIS_TOLERANCE_DEG: f64 = 15.0;
/// Distance at which the detection miss rate equals its base value.
pub const MISS_REFERENCE_DISTANCE_M: f64 = 1.5;
pub const CLOSEUP_DISTANCE_M: f64 = 0.5;
/// Half-width of the arc the close-up cameras are spread over.
pub const CLOSEUP_ARC_DEG: f64 = 22.5;
/// Half the side of the square switch casing.
pub const CASING_HALF_SIZE_M: f64 = 0.045;
/// Width of the dark outline drawn around the casing.
pub const OUTLINE_WIDTH_M: f64 = 0.004;

const WALL: f64 = 205.0;
const CASING: f64 = 235.0;
const OUTLINE: f64 = 25.0;
const BACKGROUND: u8 = 128;

/// Intrinsics of every simulated camera.
pub fn sim_intrinsics() -> CameraIntrinsics {
    CameraIntrinsics { fx: 200.0, fy: 200.0, cx: 100.0, cy: 75.0, width: 200, height: 150 }
}

/// Camera placement relative to a switch: distance along the (rotated)
/// normal and yaw about the world vertical.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Viewpoint {
    pub distance_m: f64,
    #[serde(default)]
    pub angle_deg: f64,
}

impl Viewpoint {
    pub fn new(distance_m: f64, angle_deg: f64) -> Self {
        Self { distance_m, angle_deg }
    }
}

/// `n` close-up viewpoints spread evenly over ±22.5° around `angle_deg`.
pub fn closeup_viewpoints(n: usize, angle_deg: f64) -> Vec<Viewpoint> {
    if n <= 1 {
        return vec![Viewpoint::new(CLOSEUP_DISTANCE_M, angle_deg)];
    }
    (0..n)
        .map(|k| {
            let off = -CLOSEUP_ARC_DEG + 2.0 * CLOSEUP_ARC_DEG * k as f64 / (n - 1) as f64;
            Viewpoint::new(CLOSEUP_DISTANCE_M, angle_deg + off)
        })
        .collect()
}

/// Noise-free rendering of one switch from one viewpoint.
#[derive(Clone, Debug)]
pub struct RenderedView {
    pub intrinsics: CameraIntrinsics,
    pub camera: CameraPose,
    pub image: GrayImage,
    pub depth: DepthImage,
    /// Projected casing outline.
    pub bbox: BoundingBox,
}

/// A detection as the pipeline sees it.
#[derive(Clone, Debug)]
pub struct SimDetection {
    pub bbox: BoundingBox,
    pub depth: DepthImage,
    pub confidence: f64,
    pub image: GrayImage,
    pub intrinsics: CameraIntrinsics,
    pub camera: CameraPose,
    pub truth_bbox: BoundingBox,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutcomeKind {
    Success,
    DetectionFailure,
    RefinementFailure,
    AffordanceFailure,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InteractionOutcome {
    pub result: OutcomeKind,
    pub toggled_lamps: BTreeSet<String>,
    pub details: String,
}

impl InteractionOutcome {
    pub fn failure(result: OutcomeKind, details: impl Into<String>) -> Self {
        Self { result, toggled_lamps: BTreeSet::new(), details: details.into() }
    }

    pub fn is_success(&self) -> bool {
        self.result == OutcomeKind::Success
    }
}

/// Lamp id → on.
pub type LampSnapshot = BTreeMap<String, bool>;

/// Ground-truth world: switches, hidden wiring and lamp states, plus the
/// named random streams used for noise.
#[derive(Clone, Debug)]
pub struct SimEnvironment {
    spec: SimSceneSpec,
    buttons: Vec<Vec<Vec3>>,
    lamps: LampSnapshot,
    stream_index: u64,
    detection_rng: ChaCha8Rng,
    depth_rng: ChaCha8Rng,
}

pub fn build_sim_scene(spec: SimSceneSpec) -> Result<SimEnvironment, SimError> {
    SimEnvironment::new(spec)
}

impl SimEnvironment {
    pub fn new(spec: SimSceneSpec) -> Result<Self, SimError> {
        spec.validate()?;
        let buttons = spec.switches.iter().map(|s| s.button_centers()).collect();
        let lamps = spec.lamps.iter().map(|l| (l.id.clone(), false)).collect();
        let seed = spec.seed;
        Ok(Self {
            spec,
            buttons,
            lamps,
            stream_index: 0,
            detection_rng: stream_rng(seed, Stream::Detection, 0),
            depth_rng: stream_rng(seed, Stream::Depth, 0),
        })
    }

    /// Copy with lamps reset and every stream moved to `index`, so attempts
    /// are independent of each other and of evaluation order.
    pub fn for_attempt(&self, index: u64) -> Self {
        let seed = self.spec.seed;
        Self {
            spec: self.spec.clone(),
            buttons: self.buttons.clone(),
            lamps: self.lamps.keys().map(|k| (k.clone(), false)).collect(),
            stream_index: index,
            detection_rng: stream_rng(seed, Stream::Detection, index),
            depth_rng: stream_rng(seed, Stream::Depth, index),
        }
    }

    pub fn spec(&self) -> &SimSceneSpec {
        &self.spec
    }

    pub fn noise(&self) -> &NoiseConfig {
        &self.spec.noise
    }

    pub fn seed(&self) -> u64 {
        self.spec.seed
    }

    pub fn stream_index(&self) -> u64 {
        self.stream_index
    }

    pub fn switch_count(&self) -> usize {
        self.spec.switches.len()
    }

    pub fn buttons(&self, switch: usize) -> Result<&[Vec3], SimError> {
        self.buttons.get(switch).map(Vec::as_slice).ok_or(SimError::UnknownSwitch(switch))
    }

    pub fn snapshot(&self) -> LampSnapshot {
        self.lamps.clone()
    }

    pub fn lamp_on(&self, id: &str) -> Result<bool, SimError> {
        self.lamps.get(id).copied().ok_or_else(|| SimError::UnknownLamp(id.into()))
    }

    /// Lamps wired to one button.
    pub fn wired_lamps(&self, switch: usize, button: usize) -> BTreeSet<String> {
        self.spec
            .wiring
            .iter()
            .filter(|w| w.switch == switch && w.button == button)
            .flat_map(|w| w.lamps.iter().cloned())
            .collect()
    }

    /// Switch whose nearest button is closest to `p`.
    pub fn nearest_switch(&self, p: &Vec3) -> Option<usize> {
        self.buttons
            .iter()
            .enumerate()
            .map(|(i, bs)| (i, bs.iter().map(|b| (b - p).norm()).fold(f64::INFINITY, f64::min)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(i, _)| i)
    }

    pub fn view_camera(&self, switch: usize, vp: &Viewpoint) -> Result<CameraPose, SimError> {
        let s = self.spec.switches.get(switch).ok_or(SimError::UnknownSwitch(switch))?;
        let yaw = Rotation3::from_axis_angle(&Vector3::z_axis(), vp.angle_deg.to_radians());
        let eye = s.pose.center() + yaw * s.pose.normal() * vp.distance_m;
        CameraPose::look_at(eye, s.pose.center(), Vector3::z()).map_err(|e| SimError::Render(e.to_string()))
    }

    /// Renders the switch wall: grey wall, brighter square casing with a dark
    /// outline (2×2 supersampled), and exact z-depth.
    pub fn render_view(&self, switch: usize, vp: &Viewpoint) -> Result<RenderedView, SimError> {
        if !(vp.distance_m > 0.0 && vp.distance_m.is_finite()) {
            return Err(SimError::Render(format!("distance {} must be positive", vp.distance_m)));
        }
        let s = &self.spec.switches[switch];
        let cam = self.view_camera(switch, vp)?;
        let intr = sim_intrinsics();
        let c = s.pose.center();
        let n = s.pose.normal();
        let (y_hat, z_hat) = switch_plane_axes(&n);
        let origin = cam.position();
        let r = *cam.rotation();

        let hit = |u: f64, v: f64| -> Option<(f64, f64, f64)> {
            let d = r * Vector3::new((u - intr.cx) / intr.fx, (v - intr.cy) / intr.fy, 1.0);
            let denom = n.dot(&d);
            if denom > -1e-9 {
                return None;
            }
            let t = n.dot(&(c - origin)) / denom;
            if t <= 0.0 {
                return None;
            }
            let q = origin + d * t - c;
            Some((t, q.dot(&y_hat), q.dot(&z_hat)))
        };
        let shade = |sy: f64, sz: f64| -> f64 {
            let m = sy.abs().max(sz.abs());
            if m > CASING_HALF_SIZE_M {
                WALL
            } else if m >= CASING_HALF_SIZE_M - OUTLINE_WIDTH_M {
                OUTLINE
            } else {
                CASING
            }
        };

        let (w, h) = (intr.width, intr.height);
        let mut depth = vec![f32::NAN; w * h];
        let mut image = GrayImage::from_pixel(w as u32, h as u32, image::Luma([BACKGROUND]));
        const SUB: [f64; 2] = [-0.25, 0.25];
        for v in 0..h {
            for u in 0..w {
                let (uf, vf) = (u as f64, v as f64);
                if let Some((t, _, _)) = hit(uf, vf) {
                    depth[v * w + u] = t as f32;
                }
                let mut acc = 0.0;
                let mut k = 0;
                for du in SUB {
                    for dv in SUB {
                        if let Some((_, sy, sz)) = hit(uf + du, vf + dv) {
                            acc += shade(sy, sz);
                            k += 1;
                        }
                    }
                }
                if k > 0 {
                    image.put_pixel(u as u32, v as u32, image::Luma([(acc / k as f64).round() as u8]));
                }
            }
        }
        let depth = DepthImage::new(w, h, depth).map_err(|e| SimError::Render(e.to_string()))?;

        let a = CASING_HALF_SIZE_M - 0.5 * OUTLINE_WIDTH_M;
        let mut bbox = BoundingBox::new(f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
        for (sy, sz) in [(-a, -a), (-a, a), (a, -a), (a, a)] {
            let p = c + y_hat * sy + z_hat * sz;
            let (u, v) = project_point(&p, &intr, &cam)
                .ok_or_else(|| SimError::Render("casing corner behind the camera".into()))?;
            bbox = BoundingBox::new(bbox.x1.min(u), bbox.y1.min(v), bbox.x2.max(u), bbox.y2.max(v));
        }
        Ok(RenderedView { intrinsics: intr, camera: cam, image, depth, bbox })
    }

    /// Detector stand-in. Misses with probability
    /// `detection_miss_rate · (r / 1.5 m)²`; otherwise returns the true box
    /// jittered uniformly by ±`bbox_jitter_px` per coordinate and the depth
    /// image with Gaussian noise. Draw counts do not depend on noise levels.
    pub fn simulate_detection(&mut self, switch: usize, vp: &Viewpoint) -> Result<Option<SimDetection>, SimError> {
        if switch >= self.switch_count() {
            return Err(SimError::UnknownSwitch(switch));
        }
        let noise = self.spec.noise;
        let intr = sim_intrinsics();
        let u_miss: f64 = self.detection_rng.random();
        let jitter: [f64; 4] = std::array::from_fn(|_| self.detection_rng.random_range(-1.0..=1.0));
        let confidence: f64 = self.detection_rng.random_range(0.5..1.0);
        let depth_noise: Vec<f64> =
            (0..intr.width * intr.height).map(|_| self.depth_rng.sample(StandardNormal)).collect();

        let ratio = vp.distance_m / MISS_REFERENCE_DISTANCE_M;
        let miss = (noise.detection_miss_rate * ratio * ratio).clamp(0.0, 1.0);
        if u_miss < miss {
            return Ok(None);
        }
        let view = self.render_view(switch, vp)?;
        let j = noise.bbox_jitter_px;
        let xmax = (intr.width - 1) as f64;
        let ymax = (intr.height - 1) as f64;
        let t = &view.bbox;
        let x1 = (t.x1 + j * jitter[0]).clamp(0.0, xmax);
        let y1 = (t.y1 + j * jitter[1]).clamp(0.0, ymax);
        let x2 = (t.x2 + j * jitter[2]).clamp(0.0, xmax);
        let y2 = (t.y2 + j * jitter[3]).clamp(0.0, ymax);
        let bbox = BoundingBox::new(x1.min(x2), y1.min(y2), x1.max(x2), y1.max(y2));
        if !bbox.is_valid() {
            return Ok(None);
        }

        let sigma = noise.depth_sigma_m;
        let values: Vec<f32> = view
            .depth
            .values()
            .iter()
            .zip(&depth_noise)
            .map(|(&z, &e)| if z.is_finite() { (z as f64 + sigma * e).max(1e-4) as f32 } else { z })
            .collect();
        let depth = DepthImage::new(intr.width, intr.height, values).map_err(|e| SimError::Render(e.to_string()))?;
        Ok(Some(SimDetection {
            bbox,
            depth,
            confidence,
            image: view.image,
            intrinsics: intr,
            camera: view.camera,
            truth_bbox: view.bbox,
        }))
    }

    /// Execute `primitive` on switch `switch`. The motion type is judged
    /// first, then geometry (origin within `tolerance` of a button, axis
    /// within 15° of the normal). On success the button's lamps toggle.
    pub fn operate_switch(
        &mut self,
        switch: usize,
        primitive: &MotionPrimitive,
        tolerance: f64,
    ) -> Result<InteractionOutcome, SimError> {
        let s = self.spec.switches.get(switch).ok_or(SimError::UnknownSwitch(switch))?;
        let required = s.descriptor.switch_type().motion_type();
        if required != Some(primitive.motion_type()) {
            return Ok(InteractionOutcome::failure(
                OutcomeKind::AffordanceFailure,
                format!("{} applied to a {}", primitive.motion_type(), s.descriptor.switch_type().phrase()),
            ));
        }
        let buttons = &self.buttons[switch];
        let (button, dist) = buttons
            .iter()
            .enumerate()
            .map(|(k, b)| (k, (b - primitive.origin()).norm()))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("switches have at least one button");
        if dist > tolerance {
            return Ok(InteractionOutcome::failure(
                OutcomeKind::RefinementFailure,
                format!("origin misses nearest button by {:.1} mm", dist * 1e3),
            ));
        }
        let angle = angle_between(primitive.axis(), &s.pose.normal()).to_degrees();
        if angle >= AXIS_TOLERANCE_DEG {
            return Ok(InteractionOutcome::failure(
                OutcomeKind::RefinementFailure,
                format!("axis deviates {angle:.1} deg from the switch normal"),
            ));
        }
        let toggled = self.wired_lamps(switch, button);
        for l in &toggled {
            if let Some(state) = self.lamps.get_mut(l) {
                *state = !*state;
            }
        }
        Ok(InteractionOutcome {
            result: OutcomeKind::Success,
            toggled_lamps: toggled,
            details: format!("button {button} operated"),
        })
    }

    /// Oracle answering from the ground truth, corrupted at the configured
    /// rate, on this environment's oracle stream.
    pub fn oracle(&self) -> SimOracle {
        SimOracle::new(
            self.spec.switches.iter().map(|s| s.descriptor).collect(),
            self.spec.noise.oracle_error_rate,
            stream_rng(self.spec.seed, Stream::Oracle, self.stream_index),
        )
    }

    pub fn state_rng(&self) -> ChaCha8Rng {
        stream_rng(self.spec.seed, Stream::State, self.stream_index)
    }
}

/// Reported change of one lamp between two snapshots. With probability
/// `flip_rate` the report is replaced by one of the two other values,
/// uniformly. Always consumes two draws.
pub fn observe_state_change<R: Rng + ?Sized>(
    lamp_id: &str,
    before: &LampSnapshot,
    after: &LampSnapshot,
    flip_rate: f64,
    rng: &mut R,
) -> Result<StateChange, SimError> {
    let b = *before.get(lamp_id).ok_or_else(|| SimError::UnknownLamp(lamp_id.into()))?;
    let a = *after.get(lamp_id).ok_or_else(|| SimError::UnknownLamp(lamp_id.into()))?;
    let truth = StateChange::between(b, a);
    let u: f64 = rng.random();
    let pick: bool = rng.random();
    if u < flip_rate {
        let others: Vec<StateChange> = StateChange::ALL.into_iter().filter(|c| *c != truth).collect();
        return Ok(others[pick as usize]);
    }
    Ok(truth)
}

/// Ground-truth oracle with misclassification noise. A corrupted answer
/// always changes the motion class: push/rocker become turn or toggle, turn
/// becomes push or rocker.
///
/// Element ids are switch indices in decimal.
#[derive(Clone, Debug)]
pub struct SimOracle {
    truths: Vec<AffordanceDescriptor>,
    error_rate: f64,
    rng: ChaCha8Rng,
}

impl SimOracle {
    pub fn new(truths: Vec<AffordanceDescriptor>, error_rate: f64, rng: ChaCha8Rng) -> Self {
        Self { truths, error_rate, rng }
    }
}

fn corrupt(d: &AffordanceDescriptor, pick: bool) -> AffordanceDescriptor {
    let t = match (d.switch_type(), pick) {
        (SwitchType::PushButton | SwitchType::Rocker, false) => SwitchType::TurnButton,
        (SwitchType::PushButton | SwitchType::Rocker, true) => SwitchType::Toggle,
        (SwitchType::TurnButton | SwitchType::Toggle, false) => SwitchType::PushButton,
        (SwitchType::TurnButton | SwitchType::Toggle, true) => SwitchType::Rocker,
    };
    d.with_switch_type(t).unwrap_or_else(|_| {
        AffordanceDescriptor::new(t, d.button_count(), d.arrangement(), Default::default())
            .expect("dropping the symbol hint keeps the descriptor valid")
    })
}

impl AffordanceOracle for SimOracle {
    fn query(&mut self, element: &ElementRef) -> Result<AffordanceDescriptor, AffordanceError> {
        let truth = element
            .id
            .parse::<usize>()
            .ok()
            .and_then(|i| self.truths.get(i))
            .copied()
            .ok_or_else(|| AffordanceError::OracleUnavailable(format!("unknown element {:?}", element.id)))?;
        let u: f64 = self.rng.random();
        let pick: bool = self.rng.random();
        Ok(if u < self.error_rate { corrupt(&truth, pick) } else { truth })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::affordance::{primitives_from_descriptor, GripperOffsets, MotionType};

    fn env() -> SimEnvironment {
        build_sim_scene(SimSceneSpec::testrig()).unwrap()
    }

    fn truth_primitive(env: &SimEnvironment, i: usize) -> MotionPrimitive {
        let s = &env.spec().switches[i];
        primitives_from_descriptor(&s.descriptor, &s.pose, &GripperOffsets::default()).unwrap().as_slice()[0]
    }

    #[test]
    fn noiseless_detection_is_exact() {
        let mut e = env();
        let d = e.simulate_detection(0, &Viewpoint::new(1.0, 0.0)).unwrap().unwrap();
        assert_eq!(d.bbox, d.truth_bbox);
        let view = e.render_view(0, &Viewpoint::new(1.0, 0.0)).unwrap();
        assert_eq!(d.depth, view.depth);
        // Head-on view: the casing is centred in the image.
        let (cu, cv) = d.bbox.center();
        assert!((cu - 100.0).abs() < 1e-6 && (cv - 75.0).abs() < 1e-6);
    }

    #[test]
    fn always_missing_and_jitter_bounds() {
        let mut spec = SimSceneSpec::testrig();
        spec.noise.detection_miss_rate = 1.0;
        let mut e = build_sim_scene(spec.clone()).unwrap();
        assert!(e.simulate_detection(0, &Viewpoint::new(1.5, 0.0)).unwrap().is_none());

        spec.noise.detection_miss_rate = 0.0;
        spec.noise.bbox_jitter_px = 5.0;
        let mut e = build_sim_scene(spec).unwrap();
        for _ in 0..50 {
            let d = e.simulate_detection(1, &Viewpoint::new(0.5, 10.0)).unwrap().unwrap();
            for (a, b) in d.bbox.as_array().iter().zip(d.truth_bbox.as_array()) {
                assert!((a - b).abs() <= 5.0 + 1e-9);
            }
        }
    }

    #[test]
    fn operation_rules() {
        let mut e = env();
        let p = truth_primitive(&e, 0);
        let out = e.operate_switch(0, &p, DEFAULT_TOLERANCE_M).unwrap();
        assert!(out.is_success());
        assert_eq!(out.toggled_lamps, BTreeSet::from(["lamp_0".to_string()]));
        assert!(e.lamp_on("lamp_0").unwrap());
        e.operate_switch(0, &p, DEFAULT_TOLERANCE_M).unwrap();
        assert!(!e.lamp_on("lamp_0").unwrap());

        let shifted = MotionPrimitive::new(
            MotionType::Translation,
            *p.axis(),
            p.origin() + Vector3::x() * (2.0 * DEFAULT_TOLERANCE_M),
        )
        .unwrap();
        assert_eq!(e.operate_switch(0, &shifted, DEFAULT_TOLERANCE_M).unwrap().result, OutcomeKind::RefinementFailure);
        let rot = MotionPrimitive::new(MotionType::Rotation, *p.axis(), *p.origin()).unwrap();
        assert_eq!(e.operate_switch(0, &rot, DEFAULT_TOLERANCE_M).unwrap().result, OutcomeKind::AffordanceFailure);
        assert!(matches!(e.operate_switch(42, &p, DEFAULT_TOLERANCE_M), Err(SimError::UnknownSwitch(42))));
    }

    #[test]
    fn observation_corruption() {
        let before: LampSnapshot = [("l".to_string(), false)].into();
        let after: LampSnapshot = [("l".to_string(), true)].into();
        let mut rng = stream_rng(1, Stream::State, 0);
        assert_eq!(observe_state_change("l", &before, &after, 0.0, &mut rng).unwrap(), StateChange::OffToOn);
        assert_eq!(observe_state_change("l", &before, &before, 0.0, &mut rng).unwrap(), StateChange::NoChange);
        for _ in 0..200 {
            assert_ne!(observe_state_change("l", &before, &after, 1.0, &mut rng).unwrap(), StateChange::OffToOn);
        }
        assert!(observe_state_change("x", &before, &after, 0.0, &mut rng).is_err());
    }

    #[test]
    fn oracle_corruption_changes_motion_class() {
        let e = env();
        let mut o = SimOracle::new(
            e.spec().switches.iter().map(|s| s.descriptor).collect(),
            1.0,
            stream_rng(3, Stream::Oracle, 0),
        );
        for i in 0..9 {
            let d = o.query(&ElementRef::new(i.to_string())).unwrap();
            let truth = e.spec().switches[i].descriptor;
            assert_ne!(d.switch_type().motion_type(), truth.switch_type().motion_type());
        }
    }

    #[test]
    fn attempts_are_reproducible() {
        let mut spec = SimSceneSpec::testrig();
        spec.noise.bbox_jitter_px = 3.0;
        spec.noise.depth_sigma_m = 0.002;
        let e = build_sim_scene(spec).unwrap();
        let a = e.for_attempt(5).simulate_detection(2, &Viewpoint::new(0.5, 0.0)).unwrap().unwrap();
        let b = e.for_attempt(5).simulate_detection(2, &Viewpoint::new(0.5, 0.0)).unwrap().unwrap();
        assert_eq!(a.bbox, b.bbox);
        assert_eq!(a.depth, b.depth);
    }
}
