use std::collections::BTreeSet;

use nalgebra::Vector3;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::SimError;
use crate::affordance::{
    primitives_from_descriptor, AffordanceDescriptor, Arrangement, GripperOffsets, SwitchType, SymbolHint,
};
use crate::geometry::{ElementPose, Vec3};
use crate::rng::{stream_rng, Stream};

/// Noise injected by the simulator. All rates are probabilities.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseConfig {
    pub detection_miss_rate: f64,
    pub bbox_jitter_px: f64,
    pub depth_sigma_m: f64,
    pub oracle_error_rate: f64,
    pub state_flip_rate: f64,
}

impl NoiseConfig {
    pub fn noiseless() -> Self {
        Self::default()
    }

    /// Returns the offending field name and value.
    pub fn validate(&self) -> Result<(), (String, f64)> {
        let rates = [
            ("detection_miss_rate", self.detection_miss_rate),
            ("oracle_error_rate", self.oracle_error_rate),
            ("state_flip_rate", self.state_flip_rate),
        ];
        for (name, v) in rates {
            if !(0.0..=1.0).contains(&v) {
                return Err((name.into(), v));
            }
        }
        for (name, v) in [("bbox_jitter_px", self.bbox_jitter_px), ("depth_sigma_m", self.depth_sigma_m)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err((name.into(), v));
            }
        }
        Ok(())
    }
}

/// Ground truth for one physical switch.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SwitchSpec {
    pub pose: ElementPose,
    pub descriptor: AffordanceDescriptor,
    /// Button centres; derived from the descriptor when omitted.
    #[serde(default, with = "crate::serde_vec::vec3_list", skip_serializing_if = "Vec::is_empty")]
    pub buttons: Vec<Vec3>,
}

impl SwitchSpec {
    pub fn new(pose: ElementPose, descriptor: AffordanceDescriptor) -> Self {
        Self { pose, descriptor, buttons: Vec::new() }
    }

    /// Explicit button centres, or the ones the descriptor implies (a single
    /// centre for toggles).
    pub fn button_centers(&self) -> Vec<Vec3> {
        if !self.buttons.is_empty() {
            return self.buttons.clone();
        }
        match primitives_from_descriptor(&self.descriptor, &self.pose, &GripperOffsets::default()) {
            Ok(set) => set.as_slice().iter().map(|p| *p.origin()).collect(),
            Err(_) => vec![self.pose.center()],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LampSpec {
    pub id: String,
    #[serde(with = "crate::serde_vec::vec3")]
    pub position: Vec3,
}

/// Lamps toggled by one button of one switch.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WiringEntry {
    pub switch: usize,
    #[serde(default)]
    pub button: usize,
    pub lamps: BTreeSet<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSceneSpec {
    pub switches: Vec<SwitchSpec>,
    #[serde(default)]
    pub lamps: Vec<LampSpec>,
    #[serde(default)]
    pub wiring: Vec<WiringEntry>,
    #[serde(default)]
    pub noise: NoiseConfig,
    #[serde(default)]
    pub seed: u64,
}

fn invalid(path: impl Into<String>, message: impl Into<String>) -> SimError {
    SimError::InvalidSpec { path: path.into(), message: message.into() }
}

impl SimSceneSpec {
    pub fn from_json(text: &str) -> Result<Self, SimError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let spec: Self = serde_path_to_error::deserialize(de)
            .map_err(|e| invalid(e.path().to_string(), e.inner().to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let mut lamp_ids = BTreeSet::new();
        for (i, l) in self.lamps.iter().enumerate() {
            if l.id.is_empty() || !lamp_ids.insert(l.id.as_str()) {
                return Err(invalid(format!("lamps[{i}].id"), format!("empty or duplicate lamp id {:?}", l.id)));
            }
        }
        for (i, s) in self.switches.iter().enumerate() {
            let n = s.pose.normal();
            let c = s.pose.center();
            for (k, b) in s.buttons.iter().enumerate() {
                if (b - c).dot(&n).abs() > 1e-6 {
                    return Err(invalid(format!("switches[{i}].buttons[{k}]"), "button centre off the switch plane"));
                }
            }
        }
        for (i, w) in self.wiring.iter().enumerate() {
            let s = self
                .switches
                .get(w.switch)
                .ok_or_else(|| invalid(format!("wiring[{i}].switch"), format!("no switch {}", w.switch)))?;
            if w.button >= s.button_centers().len() {
                return Err(invalid(format!("wiring[{i}].button"), format!("switch {} has no button {}", w.switch, w.button)));
            }
            for l in &w.lamps {
                if !lamp_ids.contains(l.as_str()) {
                    return Err(invalid(format!("wiring[{i}].lamps"), format!("no lamp {l:?}")));
                }
            }
        }
        self.noise.validate().map_err(|(f, v)| invalid(format!("noise.{f}"), format!("{v} out of range")))?;
        Ok(())
    }

    /// Lamps wired to any button of `switch`.
    pub fn lamps_of_switch(&self, switch: usize) -> BTreeSet<String> {
        self.wiring.iter().filter(|w| w.switch == switch).flat_map(|w| w.lamps.iter().cloned()).collect()
    }

    /// Nine wall switches on a 3×3 grid covering every executable switch
    /// type and arrangement, wired to four lamps.
    pub fn testrig() -> Self {
        use Arrangement::*;
        use SwitchType::*;
        let d = |t, n, a, s| AffordanceDescriptor::new(t, n, a, s).expect("static descriptor");
        let descriptors = [
            d(PushButton, 1, Single, SymbolHint::None),
            d(PushButton, 2, SideBySide, SymbolHint::None),
            d(Rocker, 1, Single, SymbolHint::None),
            d(Rocker, 1, Single, SymbolHint::TopBottomPush),
            d(TurnButton, 1, Single, SymbolHint::None),
            d(PushButton, 2, StackedVertically, SymbolHint::None),
            d(Rocker, 2, SideBySide, SymbolHint::None),
            d(TurnButton, 1, Single, SymbolHint::None),
            d(PushButton, 1, Single, SymbolHint::TopBottomPush),
        ];
        let normal = Vector3::new(0.0, -1.0, 0.0);
        let switches = descriptors
            .iter()
            .enumerate()
            .map(|(i, desc)| {
                let x = -0.6 + 0.6 * (i % 3) as f64;
                let z = 0.8 + 0.3 * (i / 3) as f64;
                let pose = ElementPose::new(Vector3::new(x, 2.0, z), normal).expect("unit normal");
                SwitchSpec::new(pose, *desc)
            })
            .collect();
        let lamps = (0..4)
            .map(|i| LampSpec { id: format!("lamp_{i}"), position: Vector3::new(-1.5 + i as f64, 0.5, 2.4) })
            .collect();
        let wire = |switch, button, lamps: &[usize]| WiringEntry {
            switch,
            button,
            lamps: lamps.iter().map(|l| format!("lamp_{l}")).collect(),
        };
        let wiring = vec![
            wire(0, 0, &[0]),
            wire(1, 0, &[1]),
            wire(1, 1, &[2]),
            wire(2, 0, &[0, 3]),
            wire(3, 0, &[1]),
            wire(3, 1, &[1]),
            wire(4, 0, &[2]),
            wire(5, 0, &[3]),
            wire(5, 1, &[0]),
            wire(6, 0, &[2, 3]),
            wire(7, 0, &[1]),
            wire(8, 0, &[0]),
            wire(8, 1, &[0]),
        ];
        SimSceneSpec { switches, lamps, wiring, noise: NoiseConfig::default(), seed: 0 }
    }

    /// Random wall scene with up to `max_switches` executable switches and
    /// `max_lamps` lamps; any button may drive any subset of lamps.
    pub fn random(seed: u64, max_switches: usize, max_lamps: usize) -> Self {
        let mut rng = stream_rng(seed, Stream::Scene, 0);
        let n_s = rng.random_range(1..=max_switches.max(1));
        let n_l = rng.random_range(1..=max_lamps.max(1));
        let normal = Vector3::new(0.0, -1.0, 0.0);
        let mut switches = Vec::with_capacity(n_s);
        for i in 0..n_s {
            let t = [SwitchType::PushButton, SwitchType::Rocker, SwitchType::TurnButton][rng.random_range(0..3)];
            let desc = match rng.random_range(0..4) {
                0 if t != SwitchType::TurnButton => {
                    AffordanceDescriptor::new(t, 2, Arrangement::SideBySide, SymbolHint::None)
                }
                1 if t != SwitchType::TurnButton => {
                    AffordanceDescriptor::new(t, 2, Arrangement::StackedVertically, SymbolHint::None)
                }
                _ => Ok(AffordanceDescriptor::single(t)),
            }
            .expect("consistent descriptor");
            let x = -1.5 + 0.5 * i as f64 + rng.random_range(-0.1..0.1);
            let z = 1.0 + rng.random_range(-0.2..0.2);
            let pose = ElementPose::new(Vector3::new(x, 2.0, z), normal).expect("unit normal");
            switches.push(SwitchSpec::new(pose, desc));
        }
        let lamps: Vec<LampSpec> = (0..n_l)
            .map(|i| LampSpec { id: format!("lamp_{i}"), position: Vector3::new(-1.5 + 0.6 * i as f64, 0.5, 2.4) })
            .collect();
        let mut wiring = Vec::new();
        for (si, s) in switches.iter().enumerate() {
            for b in 0..s.button_centers().len() {
                let set: BTreeSet<String> =
                    lamps.iter().filter(|_| rng.random_bool(0.4)).map(|l| l.id.clone()).collect();
                if !set.is_empty() {
                    wiring.push(WiringEntry { switch: si, button: b, lamps: set });
                }
            }
        }
        SimSceneSpec { switches, lamps, wiring, noise: NoiseConfig::default(), seed }
    }
}
