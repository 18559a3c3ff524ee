use std::path::{Path, PathBuf};

use serde::Serialize;
use spotlight_core::affordance::{oracle_from_env, AffordanceOracle, SubprocessOracle};
use spotlight_core::geometry::{average_poses, estimate_element_pose, RansacConfig};
use spotlight_core::graph::SceneGraph;
use spotlight_core::metrics::{detection_summary, DetectionRecord};
use spotlight_core::motion::{build_door_primitive, sample_trajectory, Box3D, DoorPrimitive};
use spotlight_core::pipeline::{run_pipeline_once, AppConfig, ConfigError, PipelineRun};
use spotlight_core::refine::{refine_on_image, LineDetectorConfig, SearchOptions};
use spotlight_core::sim::{
    build_sim_scene, ground_truth_graph, run_exploration, run_success_experiment, ExperimentConfig,
    ExperimentReport, SimSceneSpec,
};
use spotlight_core::{CameraIntrinsics, CameraPose, DepthImage, ElementPose, Result, Vec3};

use crate::io::{emit, read_json, read_jsonl, read_text, write_text};
use crate::{
    DoorPrimitiveArgs, EstimatePoseArgs, EvalDetectionsArgs, ExploreArgs, ParamOverrides, PipelineArgs,
    RefineBboxArgs, RunExperimentArgs,
};

pub fn refine_bbox(a: RefineBboxArgs) -> Result<()> {
    if !(0.0..=1.0).contains(&a.lambda) {
        return Err(ConfigError::invalid("lambda", format!("{} is outside [0, 1]", a.lambda)).into());
    }
    let img = image::open(&a.image)
        .map_err(|e| ConfigError::Parse { path: a.image.display().to_string(), message: e.to_string() })?
        .to_luma8();
    let lines = LineDetectorConfig { seed: a.seed, ..Default::default() };
    let r = refine_on_image(&img, &a.bbox, a.lambda, &lines, &SearchOptions::default())?;
    emit(&r, a.out.as_deref())
}

#[derive(Serialize)]
struct PoseOutput {
    pose: ElementPose,
    views: Vec<ElementPose>,
}

pub fn estimate_pose(a: EstimatePoseArgs) -> Result<()> {
    if a.bbox.len() != a.depth.len() {
        return Err(ConfigError::invalid("bbox", format!("{} boxes for {} depth views", a.bbox.len(), a.depth.len())).into());
    }
    if !a.camera.is_empty() && a.camera.len() != a.depth.len() {
        return Err(ConfigError::invalid("camera", format!("{} cameras for {} depth views", a.camera.len(), a.depth.len())).into());
    }
    let intr: CameraIntrinsics = read_json(&a.intrinsics)?;
    intr.validate()?;
    let mut views = Vec::with_capacity(a.depth.len());
    for (k, (path, bbox)) in a.depth.iter().zip(&a.bbox).enumerate() {
        let depth = DepthImage::read(path)?;
        let cam = match a.camera.get(k) {
            Some(p) => read_json::<CameraPose>(p)?,
            None => CameraPose::identity(),
        };
        let ransac = RansacConfig { threshold: a.ransac_threshold, max_iters: a.ransac_iters, seed: a.seed.wrapping_add(k as u64) };
        views.push(estimate_element_pose(bbox, &depth, &intr, &cam, &ransac)?);
    }
    let pose = average_poses(&views)?;
    emit(&PoseOutput { pose, views }, a.out.as_deref())
}

#[derive(Serialize)]
struct DoorOutput {
    primitive: DoorPrimitive,
    trajectory: Vec<[f64; 3]>,
}

pub fn door_primitive(a: DoorPrimitiveArgs) -> Result<()> {
    let handle: Box3D = read_json(&a.handle)?;
    let front: Box3D = read_json(&a.front)?;
    let points: Vec<Vec3> = match &a.points {
        Some(p) => read_json::<Vec<[f64; 3]>>(p)?.into_iter().map(Vec3::from).collect(),
        None => handle.corners().to_vec(),
    };
    let door = build_door_primitive(&handle, &front, &points)?;
    let trajectory = sample_trajectory(&door, a.steps)?.iter().map(|p| [p.x, p.y, p.z]).collect();
    emit(&DoorOutput { primitive: door, trajectory }, a.out.as_deref())
}

pub fn eval_detections(a: EvalDetectionsArgs) -> Result<()> {
    let preds: Vec<DetectionRecord> = read_jsonl(&a.preds)?;
    let gts: Vec<DetectionRecord> = read_jsonl(&a.gts)?;
    let s = detection_summary(&preds, &gts)?;
    emit(&s, a.out.as_deref())
}

/// Config file (or defaults) with command-line overrides applied and
/// re-validated.
fn load_config(path: Option<&Path>, o: &ParamOverrides) -> Result<(AppConfig, PathBuf)> {
    let (mut cfg, base) = match path {
        Some(p) => {
            let text = read_text(p)?;
            let cfg = AppConfig::from_json(&text)?;
            (cfg, p.parent().map(Path::to_path_buf).unwrap_or_default())
        }
        None => (AppConfig::default(), PathBuf::new()),
    };
    if let Some(l) = o.lambda {
        cfg.params.lambda = l;
    }
    if let Some(n) = o.refinement_count {
        cfg.params.refinement_count = n;
    }
    if o.no_bbox_refine {
        cfg.params.use_bbox_refine = false;
    }
    if let Some(t) = o.tolerance {
        cfg.params.tolerance_m = t;
    }
    cfg.validate()?;
    Ok((cfg, base))
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn load_scene(path: &Path) -> Result<SimSceneSpec> {
    Ok(SimSceneSpec::from_json(&read_text(path)?)?)
}

fn scene_of(cfg: &AppConfig, base: &Path) -> Result<SimSceneSpec> {
    let mut spec = match (&cfg.scene, &cfg.scene_path) {
        (Some(s), _) => s.clone(),
        (None, Some(p)) => load_scene(&resolve(base, Path::new(p)))?,
        (None, None) => SimSceneSpec::testrig(),
    };
    if let Some(n) = cfg.noise {
        spec.noise = n;
    }
    Ok(spec)
}

#[derive(Serialize)]
struct ExperimentOutput {
    seed: u64,
    #[serde(flatten)]
    report: ExperimentReport,
}

pub fn run_experiment(a: RunExperimentArgs) -> Result<()> {
    let (mut cfg, base) = load_config(a.config.as_deref(), &a.overrides)?;
    if let Some(n) = a.attempts {
        if n == 0 {
            return Err(ConfigError::invalid("n_attempts_per_switch", "must be at least 1").into());
        }
        cfg.n_attempts_per_switch = n;
    }
    let seed = a.seed.unwrap_or(cfg.seed);
    let exp = ExperimentConfig {
        scene: scene_of(&cfg, &base)?,
        noise: None,
        n_attempts_per_switch: cfg.n_attempts_per_switch,
        params: cfg.params.clone(),
        ci_method: cfg.ci_method,
    };
    let report = run_success_experiment(&exp, seed)?;
    emit(&ExperimentOutput { seed, report }, a.out.as_deref())
}

pub fn explore(a: ExploreArgs) -> Result<()> {
    let o = ParamOverrides { tolerance: a.tolerance, ..Default::default() };
    let (mut cfg, base) = load_config(a.config.as_deref(), &o)?;
    if let Some(n) = a.passes {
        cfg.exploration.passes = n;
    }
    cfg.exploration.majority_vote |= a.majority_vote;
    cfg.validate()?;
    let mut spec = match &a.scene {
        Some(p) => {
            let mut s = load_scene(p)?;
            if let Some(n) = cfg.noise {
                s.noise = n;
            }
            s
        }
        None => scene_of(&cfg, &base)?,
    };
    spec.seed = a.seed.unwrap_or(cfg.seed);
    let mut env = build_sim_scene(spec)?;
    let graph_path = match (&a.graph, &cfg.graph_path) {
        (Some(p), _) => Some(p.clone()),
        (None, Some(p)) => Some(resolve(&base, Path::new(p))),
        (None, None) => None,
    };
    let graph = match graph_path {
        Some(p) => SceneGraph::from_json(&read_text(&p)?)?,
        None => ground_truth_graph(&env, &cfg.params.offsets()?)?,
    };
    let policy = cfg.exploration.policy();
    let (learned, log) = run_exploration(graph, &mut env, &policy, cfg.params.tolerance_m)?;
    if let Some(p) = &a.log {
        let mut text = String::new();
        for entry in &log {
            text.push_str(&serde_json::to_string(entry).expect("log entries serialize"));
            text.push('\n');
        }
        write_text(p, &text)?;
    }
    let mut text = learned.to_json_pretty();
    text.push('\n');
    match &a.out {
        Some(p) => write_text(p, &text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn pick_oracle(cfg: &AppConfig) -> Result<Option<Box<dyn AffordanceOracle + Send>>> {
    if let Some(o) = oracle_from_env()? {
        return Ok(Some(o));
    }
    match &cfg.oracle_cmd {
        Some(cmd) => Ok(Some(Box::new(SubprocessOracle::spawn_shell(cmd)?))),
        None => Ok(None),
    }
}

pub fn pipeline(a: PipelineArgs) -> Result<()> {
    let (cfg, base) = load_config(a.config.as_deref(), &a.overrides)?;
    let mut spec = scene_of(&cfg, &base)?;
    spec.seed = a.seed.unwrap_or(cfg.seed);
    let env = build_sim_scene(spec)?;
    if a.switch >= env.switch_count() {
        return Err(spotlight_core::sim::SimError::UnknownSwitch(a.switch).into());
    }
    let mut env = env.for_attempt(a.attempt);
    let run: PipelineRun = match pick_oracle(&cfg)? {
        Some(mut o) => run_pipeline_once(&cfg.params, &mut env, a.switch, o.as_mut())?,
        None => {
            let mut o = env.oracle();
            run_pipeline_once(&cfg.params, &mut env, a.switch, &mut o)?
        }
    };
    emit(&run, a.out.as_deref())
}
