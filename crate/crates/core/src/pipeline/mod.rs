//! Application configuration and the end-to-end single-attempt driver:
//! detect → refine box → estimate/average pose → affordance → operate.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::affordance::{
    primitives_from_descriptor, AffordanceDescriptor, AffordanceOracle, ElementRef, GripperOffsets,
    MotionPrimitive,
};
use crate::bbox::BoundingBox;
use crate::geometry::{average_poses, estimate_element_pose, ElementPose, RansacConfig};
use crate::graph::DEFAULT_CLUSTER_RADIUS;
use crate::metrics::CiMethod;
use crate::refine::{refine_on_image, LineDetectorConfig, SearchOptions};
use crate::rng::{derive_seed, Stream};
use crate::sim::{
    closeup_viewpoints, ExplorationPolicy, InteractionOutcome, NoiseConfig, OutcomeKind, SimEnvironment,
    SimSceneSpec, Viewpoint, DEFAULT_TOLERANCE_M,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("invalid value for {field}: {message}")]
    Invalid { field: String, message: String },
    #[error("cannot parse configuration at {path}: {message}")]
    Parse { path: String, message: String },
}

impl ConfigError {
    pub fn invalid(field: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError::Invalid { field: field.into(), message: message.into() }
    }

    pub fn field(&self) -> &str {
        match self {
            ConfigError::Invalid { field, .. } => field,
            ConfigError::Parse { path, .. } => path,
        }
    }
}

/// Parameters of one pipeline attempt.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineParams {
    /// Weight of the rectangularity term, in [0, 1].
    pub lambda: f64,
    pub delta_y: f64,
    pub delta_z: f64,
    /// Number of close-up views averaged into the pose (N_r).
    pub refinement_count: usize,
    pub use_bbox_refine: bool,
    pub ransac: RansacConfig,
    /// Success tolerance between primitive origin and button centre, metres.
    pub tolerance_m: f64,
    /// Where the robot stands when it first detects the switch.
    pub placement: Viewpoint,
    pub line_detector: LineDetectorConfig,
    pub search: SearchOptions,
}

impl Default for PipelineParams {
    fn default() -> Self {
        Self {
            lambda: 0.1,
            delta_y: 0.03,
            delta_z: 0.03,
            refinement_count: 4,
            use_bbox_refine: true,
            ransac: RansacConfig::default(),
            tolerance_m: DEFAULT_TOLERANCE_M,
            placement: Viewpoint::new(1.0, 0.0),
            line_detector: LineDetectorConfig::default(),
            search: SearchOptions::default(),
        }
    }
}

fn positive(field: &str, v: f64) -> Result<(), ConfigError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(ConfigError::invalid(field, format!("{v} must be positive")))
    }
}

impl PipelineParams {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(ConfigError::invalid("lambda", format!("{} outside [0, 1]", self.lambda)));
        }
        positive("delta_y", self.delta_y)?;
        positive("delta_z", self.delta_z)?;
        if self.refinement_count < 1 {
            return Err(ConfigError::invalid("refinement_count", "at least one view is required"));
        }
        positive("ransac.threshold", self.ransac.threshold)?;
        if self.ransac.max_iters < 1 {
            return Err(ConfigError::invalid("ransac.max_iters", "must be at least 1"));
        }
        positive("tolerance_m", self.tolerance_m)?;
        positive("placement.distance_m", self.placement.distance_m)?;
        if !self.placement.angle_deg.is_finite() || self.placement.angle_deg.abs() >= 90.0 {
            return Err(ConfigError::invalid("placement.angle_deg", "must lie in (-90, 90)"));
        }
        if self.search.min_step <= 0.0 || self.search.initial_step < self.search.min_step {
            return Err(ConfigError::invalid("search", "need 0 < min_step <= initial_step"));
        }
        Ok(())
    }

    pub fn offsets(&self) -> Result<GripperOffsets, ConfigError> {
        GripperOffsets::new(self.delta_y, self.delta_z).map_err(|e| ConfigError::invalid("delta_y", e.to_string()))
    }
}

/// Settings for the exploration driver.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExplorationSettings {
    pub passes: usize,
    pub majority_vote: bool,
}

impl Default for ExplorationSettings {
    fn default() -> Self {
        Self { passes: 1, majority_vote: false }
    }
}

impl ExplorationSettings {
    pub fn policy(&self) -> ExplorationPolicy {
        ExplorationPolicy { passes: self.passes, majority_vote: self.majority_vote, ..Default::default() }
    }
}

/// Everything the command-line application reads from its config file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AppConfig {
    /// Scene spec file; resolved relative to the config file.
    pub scene_path: Option<PathBuf>,
    /// Inline scene; takes precedence over `scene_path`.
    pub scene: Option<SimSceneSpec>,
    pub graph_path: Option<PathBuf>,
    /// Shell command of a subprocess affordance oracle.
    pub oracle_cmd: Option<String>,
    #[serde(flatten)]
    pub params: PipelineParams,
    pub cluster_radius: f64,
    /// Replaces the scene's noise block when present.
    pub noise: Option<NoiseConfig>,
    pub seed: u64,
    pub n_attempts_per_switch: usize,
    pub ci_method: CiMethod,
    pub exploration: ExplorationSettings,
}

impl Default for AppConfig {
    fn default() -> Self {
        Self {
            scene_path: None,
            scene: None,
            graph_path: None,
            oracle_cmd: None,
            params: PipelineParams::default(),
            cluster_radius: DEFAULT_CLUSTER_RADIUS,
            noise: None,
            seed: 0,
            n_attempts_per_switch: 10,
            ci_method: CiMethod::Wald,
            exploration: ExplorationSettings::default(),
        }
    }
}

impl AppConfig {
    /// Parse and validate.
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: Self = serde_path_to_error::deserialize(de)
            .map_err(|e| ConfigError::Parse { path: e.path().to_string(), message: e.inner().to_string() })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.params.validate()?;
        positive("cluster_radius", self.cluster_radius)?;
        if self.n_attempts_per_switch < 1 {
            return Err(ConfigError::invalid("n_attempts_per_switch", "must be at least 1"));
        }
        if self.exploration.passes < 1 {
            return Err(ConfigError::invalid("exploration.passes", "must be at least 1"));
        }
        if let Some(n) = &self.noise {
            n.validate().map_err(|(f, v)| ConfigError::invalid(format!("noise.{f}"), format!("{v} out of range")))?;
        }
        if let Some(s) = &self.scene {
            s.validate().map_err(|e| ConfigError::invalid("scene", e.to_string()))?;
        }
        Ok(())
    }
}

/// One view used for pose refinement.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ViewTrace {
    pub angle_deg: f64,
    pub detected: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detected_bbox: Option<BoundingBox>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub refined_bbox: Option<BoundingBox>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pose: Option<ElementPose>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Stage-by-stage record of one attempt; stages after the first failure are
/// absent.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "stage", rename_all = "snake_case")]
pub enum StageTrace {
    Detection {
        detected: bool,
        #[serde(skip_serializing_if = "Option::is_none")]
        bbox: Option<BoundingBox>,
        #[serde(skip_serializing_if = "Option::is_none")]
        confidence: Option<f64>,
    },
    BboxRefinement {
        enabled: bool,
        views: Vec<ViewTrace>,
    },
    PoseEstimation {
        views_used: usize,
        #[serde(skip_serializing_if = "Option::is_none")]
        pose: Option<ElementPose>,
        #[serde(skip_serializing_if = "Option::is_none")]
        error: Option<String>,
    },
    Affordance {
        #[serde(skip_serializing_if = "Option::is_none")]
        descriptor: Option<AffordanceDescriptor>,
        primitives: Vec<MotionPrimitive>,
        #[serde(skip_serializing_if = "Option::is_none")]
        error: Option<String>,
    },
    Operation {
        primitive: MotionPrimitive,
        outcome: InteractionOutcome,
    },
}

impl StageTrace {
    pub fn name(&self) -> &'static str {
        match self {
            StageTrace::Detection { .. } => "detection",
            StageTrace::BboxRefinement { .. } => "bbox_refinement",
            StageTrace::PoseEstimation { .. } => "pose_estimation",
            StageTrace::Affordance { .. } => "affordance",
            StageTrace::Operation { .. } => "operation",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PipelineRun {
    pub switch: usize,
    pub outcome: InteractionOutcome,
    pub stages: Vec<StageTrace>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pose: Option<ElementPose>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub descriptor: Option<AffordanceDescriptor>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub primitive: Option<MotionPrimitive>,
}

impl PipelineRun {
    fn stop(mut self, kind: OutcomeKind, details: impl Into<String>) -> Self {
        self.outcome = InteractionOutcome::failure(kind, details);
        self
    }
}

/// Run every stage once against `env`, stopping at the first failing stage
/// and reporting its failure class.
pub fn run_pipeline_once(
    params: &PipelineParams,
    env: &mut SimEnvironment,
    switch: usize,
    oracle: &mut dyn AffordanceOracle,
) -> crate::Result<PipelineRun> {
    params.validate()?;
    let offsets = params.offsets()?;
    let mut run = PipelineRun {
        switch,
        outcome: InteractionOutcome::failure(OutcomeKind::DetectionFailure, ""),
        stages: Vec::new(),
        pose: None,
        descriptor: None,
        primitive: None,
    };

    // Detection from the robot's placement.
    let det = env.simulate_detection(switch, &params.placement)?;
    run.stages.push(StageTrace::Detection {
        detected: det.is_some(),
        bbox: det.as_ref().map(|d| d.bbox),
        confidence: det.as_ref().map(|d| d.confidence),
    });
    if det.is_none() {
        return Ok(run.stop(OutcomeKind::DetectionFailure, "switch not detected from the placement"));
    }

    // Close-up views: re-detect, snap the box to edges, estimate a pose.
    let mut views = Vec::with_capacity(params.refinement_count);
    let mut poses = Vec::with_capacity(params.refinement_count);
    for (k, vp) in closeup_viewpoints(params.refinement_count, params.placement.angle_deg).iter().enumerate() {
        let mut view = ViewTrace {
            angle_deg: vp.angle_deg,
            detected: false,
            detected_bbox: None,
            refined_bbox: None,
            pose: None,
            error: None,
        };
        let Some(d) = env.simulate_detection(switch, vp)? else {
            views.push(view);
            continue;
        };
        view.detected = true;
        view.detected_bbox = Some(d.bbox);
        let mut bbox = d.bbox;
        if params.use_bbox_refine {
            match refine_on_image(&d.image, &d.bbox, params.lambda, &params.line_detector, &params.search) {
                Ok(r) => bbox = r.bbox,
                Err(e) => view.error = Some(format!("refinement skipped: {e}")),
            }
            view.refined_bbox = Some(bbox);
        }
        let ransac = RansacConfig {
            seed: derive_seed(env.seed(), Stream::Ransac, (env.stream_index() << 8) | k as u64),
            ..params.ransac
        };
        match estimate_element_pose(&bbox, &d.depth, &d.intrinsics, &d.camera, &ransac) {
            Ok(p) => {
                view.pose = Some(p);
                poses.push(p);
            }
            Err(e) => view.error = Some(e.to_string()),
        }
        views.push(view);
    }
    let any_detected = views.iter().any(|v| v.detected);
    run.stages.push(StageTrace::BboxRefinement { enabled: params.use_bbox_refine, views });
    if !any_detected {
        return Ok(run.stop(OutcomeKind::DetectionFailure, "switch not detected in any close-up view"));
    }

    let averaged = if poses.is_empty() {
        Err("no view produced a pose".to_string())
    } else {
        average_poses(&poses).map_err(|e| e.to_string())
    };
    run.stages.push(StageTrace::PoseEstimation {
        views_used: poses.len(),
        pose: averaged.as_ref().ok().copied(),
        error: averaged.as_ref().err().cloned(),
    });
    let pose = match averaged {
        Ok(p) => p,
        Err(e) => return Ok(run.stop(OutcomeKind::RefinementFailure, e)),
    };
    run.pose = Some(pose);

    // Affordance and primitives.
    let descriptor = oracle.query(&ElementRef::new(switch.to_string()));
    let primitives = descriptor
        .as_ref()
        .map_err(|e| e.clone())
        .and_then(|d| primitives_from_descriptor(d, &pose, &offsets));
    run.stages.push(StageTrace::Affordance {
        descriptor: descriptor.as_ref().ok().copied(),
        primitives: primitives.as_ref().map(|p| p.as_slice().to_vec()).unwrap_or_default(),
        error: primitives.as_ref().err().map(|e| e.to_string()),
    });
    run.descriptor = descriptor.ok();
    let primitive = match primitives {
        Ok(set) => set.as_slice()[0],
        Err(e) => return Ok(run.stop(OutcomeKind::AffordanceFailure, e.to_string())),
    };
    run.primitive = Some(primitive);

    let outcome = env.operate_switch(switch, &primitive, params.tolerance_m)?;
    run.stages.push(StageTrace::Operation { primitive, outcome: outcome.clone() });
    run.outcome = outcome;
    Ok(run)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::build_sim_scene;

    #[test]
    fn noiseless_attempt_succeeds_with_full_trace() {
        let env = build_sim_scene(SimSceneSpec::testrig()).unwrap();
        for switch in 0..env.switch_count() {
            let mut e = env.for_attempt(1);
            let mut oracle = e.oracle();
            let run = run_pipeline_once(&PipelineParams::default(), &mut e, switch, &mut oracle).unwrap();
            assert!(run.outcome.is_success(), "switch {switch}: {:?}", run.outcome);
            let names: Vec<_> = run.stages.iter().map(StageTrace::name).collect();
            assert_eq!(names, ["detection", "bbox_refinement", "pose_estimation", "affordance", "operation"]);
        }
    }

    #[test]
    fn short_circuits() {
        let mut spec = SimSceneSpec::testrig();
        spec.noise.detection_miss_rate = 1.0;
        let mut e = build_sim_scene(spec.clone()).unwrap();
        let mut o = e.oracle();
        let run = run_pipeline_once(&PipelineParams::default(), &mut e, 0, &mut o).unwrap();
        assert_eq!(run.outcome.result, OutcomeKind::DetectionFailure);
        assert_eq!(run.stages.len(), 1);

        spec.noise.detection_miss_rate = 0.0;
        spec.noise.oracle_error_rate = 1.0;
        let mut e = build_sim_scene(spec).unwrap();
        let mut o = e.oracle();
        let run = run_pipeline_once(&PipelineParams::default(), &mut e, 0, &mut o).unwrap();
        assert_eq!(run.outcome.result, OutcomeKind::AffordanceFailure);
    }

    #[test]
    fn config_validation_names_field() {
        let err = AppConfig::from_json(r#"{"lambda": 2.0}"#).unwrap_err();
        assert_eq!(err.field(), "lambda");
        let err = AppConfig::from_json(r#"{"refinement_count": 0}"#).unwrap_err();
        assert_eq!(err.field(), "refinement_count");
        let err = AppConfig::from_json(r#"{"noise": {"state_flip_rate": 3}}"#).unwrap_err();
        assert_eq!(err.field(), "noise.state_flip_rate");
        assert!(AppConfig::from_json("{}").is_ok());
    }
}
