//! Hand-evaluated reference values, checked through the public API only.

use std::f64::consts::{FRAC_PI_2, SQRT_2};

use approx::assert_abs_diff_eq;
use nalgebra::Vector3;
use spotlight_core::affordance::{
    parse_json_response, primitives_from_descriptor, AffordanceDescriptor, Arrangement, GripperOffsets, MotionType,
    SwitchType, SymbolHint,
};
use spotlight_core::geometry::{average_poses, principal_axis, unproject_pixel};
use spotlight_core::graph::{cluster_detections, Detection3D};
use spotlight_core::metrics::{average_precision, iou, success_rate_ci, DetectionRecord};
use spotlight_core::motion::{
    build_door_primitive, classify_interaction, swing_trajectory_point, Box3D, RotationSense,
};
use spotlight_core::refine::{distance_map, rectangularity_loss, LineMap};
use spotlight_core::{BoundingBox, CameraIntrinsics, CameraPose, ElementPose};

#[test]
fn unproject_off_centre_pixel() {
    let intr = CameraIntrinsics { fx: 100.0, fy: 100.0, cx: 50.0, cy: 50.0, width: 200, height: 100 };
    let p = unproject_pixel((150.0, 50.0), 2.0, &intr, &CameraPose::identity()).unwrap();
    assert_abs_diff_eq!(p, Vector3::new(2.0, 0.0, 2.0), epsilon = 1e-12);
}

#[test]
fn symmetric_normals_average_to_their_bisector() {
    let t = 10f64.to_radians();
    let c = Vector3::new(0.5, 0.2, 1.0);
    let a = ElementPose::new(c, Vector3::new(t.sin(), 0.0, t.cos())).unwrap();
    let b = ElementPose::new(c, Vector3::new(-t.sin(), 0.0, t.cos())).unwrap();
    let m = average_poses(&[a, b]).unwrap();
    assert_abs_diff_eq!(m.normal(), Vector3::z(), epsilon = 1e-12);
    assert_abs_diff_eq!(m.center(), c, epsilon = 1e-12);
}

#[test]
fn principal_axis_of_a_diagonal_segment() {
    let pts: Vec<_> = (0..200)
        .map(|i| {
            let s = i as f64 / 199.0;
            let wobble = 0.01 * ((i * 37 % 17) as f64 / 8.0 - 1.0);
            Vector3::new(s + wobble, s - wobble, 0.0)
        })
        .collect();
    let a = principal_axis(&pts).unwrap();
    let want = Vector3::new(1.0, 1.0, 0.0) / SQRT_2;
    assert!(a.dot(&want).abs() > 2f64.to_radians().cos());
}

#[test]
fn distance_map_single_corner_pixel() {
    let mut m = LineMap::empty(3, 3);
    m.set(0, 0);
    let d = distance_map(&m).unwrap();
    assert_eq!(d.get(2, 2), 1.0);
    assert_eq!(d.get(0, 0), 0.0);
    assert_abs_diff_eq!(d.get(1, 0), 1.0 / (2.0 * SQRT_2), epsilon = 1e-15);
}

#[test]
fn rectangularity_values() {
    assert_abs_diff_eq!(rectangularity_loss(&BoundingBox::new(0.0, 0.0, 10.0, 20.0)).unwrap(), 0.5, epsilon = 1e-15);
    assert_abs_diff_eq!(rectangularity_loss(&BoundingBox::new(0.0, 0.0, 1.0, 100.0)).unwrap(), 0.99, epsilon = 1e-15);
}

#[test]
fn subprocess_json_line_round_trip() {
    let d = parse_json_response(r#"{"type":"push button","count":2,"arrangement":"side-by-side"}"#).unwrap();
    assert_eq!(
        d,
        AffordanceDescriptor::new(SwitchType::PushButton, 2, Arrangement::SideBySide, SymbolHint::None).unwrap()
    );
}

#[test]
fn side_by_side_pair_origins() {
    let pose = ElementPose::new(Vector3::new(1.0, 2.0, 1.0), Vector3::new(1.0, 0.0, 0.0)).unwrap();
    let desc = AffordanceDescriptor::new(SwitchType::PushButton, 2, Arrangement::SideBySide, SymbolHint::None).unwrap();
    let set = primitives_from_descriptor(&desc, &pose, &GripperOffsets::default()).unwrap();
    let mut ys: Vec<f64> = set.as_slice().iter().map(|p| p.origin().y).collect();
    ys.sort_by(f64::total_cmp);
    assert_eq!(set.len(), 2);
    assert_abs_diff_eq!(ys[0], 1.97, epsilon = 1e-12);
    assert_abs_diff_eq!(ys[1], 2.03, epsilon = 1e-12);
    for p in set.as_slice() {
        assert_eq!(p.motion_type(), MotionType::Translation);
        assert_abs_diff_eq!(p.origin().x, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p.origin().z, 1.0, epsilon = 1e-12);
    }
}

fn front() -> Box3D {
    // 0.6 m wide along x, thin along y, tall along z.
    Box3D::axis_aligned(Vector3::new(0.0, 0.0, 1.0), Vector3::new(0.3, 0.01, 0.9)).unwrap()
}

fn handle_at(x: f64) -> Box3D {
    Box3D::axis_aligned(Vector3::new(x, -0.04, 1.0), Vector3::new(0.01, 0.02, 0.06)).unwrap()
}

#[test]
fn eccentric_handle_rotates() {
    assert_eq!(classify_interaction(&handle_at(0.4 * 0.3), &front()).unwrap(), MotionType::Rotation);
    assert_eq!(classify_interaction(&handle_at(0.0), &front()).unwrap(), MotionType::Translation);
}

#[test]
fn hinge_opposite_the_handle() {
    let h = handle_at(-0.25);
    let d = build_door_primitive(&h, &front(), &h.corners()).unwrap();
    assert_abs_diff_eq!(d.lever, 0.55, epsilon = 1e-12);
    assert_abs_diff_eq!(d.hinge_axis_point.x, 0.3, epsilon = 1e-12);

    let m = handle_at(0.25);
    let dm = build_door_primitive(&m, &front(), &m.corners()).unwrap();
    assert_abs_diff_eq!(dm.lever, 0.55, epsilon = 1e-12);
    assert_abs_diff_eq!(dm.hinge_axis_point.x, -0.3, epsilon = 1e-12);
    assert_ne!(d.rotation_sense, dm.rotation_sense);
}

#[test]
fn quarter_turn_displacement() {
    let p = swing_trajectory_point(0.4, FRAC_PI_2, RotationSense::Positive).unwrap();
    assert_abs_diff_eq!(p, Vector3::new(-0.4, -0.4, 0.0), epsilon = 1e-15);
}

#[test]
fn nearby_detections_cluster_around_the_confident_one() {
    let b = BoundingBox::new(0.0, 0.0, 10.0, 10.0);
    let dets = [
        Detection3D::new(Vector3::new(0.0, 0.0, 1.0), 0.6, "f0", b),
        Detection3D::new(Vector3::new(0.05, 0.0, 1.0), 0.9, "f1", b),
    ];
    let c = cluster_detections(&dets, 0.15).unwrap();
    assert_eq!(c.len(), 1);
    assert_eq!(c[0].representative.confidence, 0.9);
}

#[test]
fn wald_interval_for_76_of_90() {
    let r = success_rate_ci(76, 90).unwrap();
    assert_abs_diff_eq!(r.sr, 0.8444, epsilon = 1e-4);
    assert_eq!(((r.lo * 100.0).round(), (r.hi * 100.0).round()), (77.0, 92.0));
}

#[test]
fn iou_and_hand_enumerated_ap() {
    let b = |x1, y1, x2, y2| BoundingBox::new(x1, y1, x2, y2);
    assert_abs_diff_eq!(iou(&b(0.0, 0.0, 10.0, 10.0), &b(5.0, 0.0, 15.0, 10.0)), 1.0 / 3.0, epsilon = 1e-15);

    let g = DetectionRecord::ground_truth("a", b(0.0, 0.0, 10.0, 10.0), "switch");
    let tp = DetectionRecord::prediction("a", b(0.0, 0.0, 10.0, 10.0), 0.9, "switch");
    let fp = DetectionRecord::prediction("a", b(50.0, 50.0, 60.0, 60.0), 0.8, "switch");
    assert_eq!(average_precision(&[tp.clone(), fp.clone()], std::slice::from_ref(&g), 0.5), 1.0);

    let g2 = DetectionRecord::ground_truth("a", b(30.0, 30.0, 40.0, 40.0), "switch");
    let fp_hi = DetectionRecord::prediction("a", b(50.0, 50.0, 60.0, 60.0), 0.9, "switch");
    let tp_lo = DetectionRecord::prediction("a", b(0.0, 0.0, 10.0, 10.0), 0.8, "switch");
    assert_eq!(average_precision(&[fp_hi, tp_lo], &[g, g2], 0.5), 0.25);
}
