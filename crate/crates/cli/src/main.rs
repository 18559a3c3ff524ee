//! `spotlight`: command-line front end for box refinement, pose estimation,
//! door primitives, detection metrics and the simulated experiments.

mod commands;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "spotlight", version, about = "Functional-element interaction pipeline tools")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Snap a detector box to the edges of a grayscale image (PGM or PNG).
    RefineBbox(RefineBboxArgs),
    /// Estimate an element pose from one or more depth views.
    EstimatePose(EstimatePoseArgs),
    /// Hinge, lever and opening trajectory for a swing door.
    DoorPrimitive(DoorPrimitiveArgs),
    /// mAP50, mAP50-95, precision and recall for JSONL detections.
    EvalDetections(EvalDetectionsArgs),
    /// Success-rate experiment on the simulated test rig.
    RunExperiment(RunExperimentArgs),
    /// Learn switch → lamp edges by operating every switch.
    Explore(ExploreArgs),
    /// One end-to-end attempt on one switch, printing a stage trace.
    Pipeline(PipelineArgs),
}

#[derive(Args, Debug)]
struct RefineBboxArgs {
    /// Grayscale image (PGM or PNG).
    #[arg(long)]
    image: PathBuf,
    /// Initial box as x1,y1,x2,y2.
    #[arg(long)]
    bbox: spotlight_core::BoundingBox,
    /// Weight of the rectangularity term, in [0, 1].
    #[arg(long, default_value_t = 0.1, allow_negative_numbers = true)]
    lambda: f64,
    /// Seed of the line detector's point order.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EstimatePoseArgs {
    /// Raw little-endian f32 depth file with a `<file>.json` sidecar; repeat
    /// for multiple views.
    #[arg(long, required = true)]
    depth: Vec<PathBuf>,
    /// Box per view as x1,y1,x2,y2; one per --depth.
    #[arg(long, required = true)]
    bbox: Vec<spotlight_core::BoundingBox>,
    /// Camera pose JSON per view ({rotation, translation}); identity when omitted.
    #[arg(long)]
    camera: Vec<PathBuf>,
    /// Intrinsics JSON ({fx, fy, cx, cy, width, height}).
    #[arg(long)]
    intrinsics: PathBuf,
    #[arg(long, default_value_t = 0.01)]
    ransac_threshold: f64,
    #[arg(long, default_value_t = 500)]
    ransac_iters: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct DoorPrimitiveArgs {
    /// Handle box JSON ({center, half_extents, orientation}).
    #[arg(long)]
    handle: PathBuf,
    /// Door front box JSON.
    #[arg(long)]
    front: PathBuf,
    /// Handle points as a JSON array of [x, y, z]; the handle box corners are
    /// used when omitted.
    #[arg(long)]
    points: Option<PathBuf>,
    #[arg(long, default_value_t = spotlight_core::motion::DEFAULT_TRAJECTORY_STEPS)]
    steps: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EvalDetectionsArgs {
    #[arg(long)]
    preds: PathBuf,
    #[arg(long)]
    gts: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Overrides applied on top of a config file.
#[derive(Args, Debug, Default)]
struct ParamOverrides {
    #[arg(long, allow_negative_numbers = true)]
    lambda: Option<f64>,
    #[arg(long)]
    refinement_count: Option<usize>,
    /// Skip bounding-box refinement.
    #[arg(long)]
    no_bbox_refine: bool,
    #[arg(long, allow_negative_numbers = true)]
    tolerance: Option<f64>,
}

#[derive(Args, Debug)]
struct RunExperimentArgs {
    /// Application config JSON; built-in defaults and the test rig when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    attempts: Option<usize>,
    #[command(flatten)]
    overrides: ParamOverrides,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ExploreArgs {
    /// Application config JSON supplying the scene, graph and exploration
    /// settings; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Scene spec JSON; the built-in test rig when neither this nor the
    /// config names one.
    #[arg(long)]
    scene: Option<PathBuf>,
    /// Starting scene graph; switches with true primitives when omitted.
    #[arg(long)]
    graph: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    passes: Option<usize>,
    #[arg(long)]
    majority_vote: bool,
    #[arg(long, allow_negative_numbers = true)]
    tolerance: Option<f64>,
    /// Learned graph output; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Interaction log as JSON lines.
    #[arg(long)]
    log: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct PipelineArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long = "switch", default_value_t = 0)]
    switch: usize,
    #[arg(long)]
    seed: Option<u64>,
    /// Attempt index selecting the random streams.
    #[arg(long, default_value_t = 1)]
    attempt: u64,
    #[command(flatten)]
    overrides: ParamOverrides,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::RefineBbox(a) => commands::refine_bbox(a),
        Command::EstimatePose(a) => commands::estimate_pose(a),
        Command::DoorPrimitive(a) => commands::door_primitive(a),
        Command::EvalDetections(a) => commands::eval_detections(a),
        Command::RunExperiment(a) => commands::run_experiment(a),
        Command::Explore(a) => commands::explore(a),
        Command::Pipeline(a) => commands::pipeline(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", io::error_json(&e));
            ExitCode::from(1)
        }
    }
}
