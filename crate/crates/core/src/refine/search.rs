use image::GrayImage;
use serde::{Deserialize, Serialize};

use super::{
    distance_map, detect_line_map, perimeter_distance_loss, rectangularity_loss, DistanceMap,
    LineDetectorConfig, RefineError,
};
use crate::bbox::BoundingBox;

/// Compass search schedule.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchOptions {
    pub initial_step: f64,
    pub min_step: f64,
    pub max_evals_per_param: usize,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self { initial_step: 4.0, min_step: 0.25, max_evals_per_param: 200 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Refinement {
    pub bbox: BoundingBox,
    pub loss_dist: f64,
    pub loss_rect: f64,
    pub objective: f64,
    pub initial_objective: f64,
    pub evaluations: usize,
}

/// `L_dist + lambda * L_rect`.
pub fn objective(b: &BoundingBox, d: &DistanceMap, lambda: f64) -> Result<f64, RefineError> {
    Ok(perimeter_distance_loss(b, d)? + lambda * rectangularity_loss(b)?)
}

fn admissible(b: &BoundingBox, d: &DistanceMap) -> bool {
    b.is_valid() && b.within(d.width(), d.height())
}

/// Local minimization of the box objective by compass search over the four
/// corner coordinates. Only strictly improving, admissible moves are taken,
/// so the result never scores worse than `bbox0`.
pub fn refine_bbox(
    bbox0: &BoundingBox,
    d: &DistanceMap,
    lambda: f64,
    opts: &SearchOptions,
) -> Result<Refinement, RefineError> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(RefineError::InvalidLambda(lambda));
    }
    if !bbox0.is_valid() {
        return Err(RefineError::DegenerateBox);
    }
    let mut best = bbox0.as_array();
    let initial_objective = objective(bbox0, d, lambda)?;
    let mut best_f = initial_objective;
    let mut evaluations = 1;
    let budget = 4 * opts.max_evals_per_param;
    let mut step = opts.initial_step;

    'search: while step >= opts.min_step {
        let mut improved = false;
        for i in 0..4 {
            for dir in [1.0, -1.0] {
                if evaluations >= budget {
                    break 'search;
                }
                let mut cand = best;
                cand[i] += dir * step;
                let cb = BoundingBox::from_array(cand);
                if !admissible(&cb, d) {
                    continue;
                }
                evaluations += 1;
                let f = objective(&cb, d, lambda)?;
                if f < best_f {
                    best = cand;
                    best_f = f;
                    improved = true;
                    break;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }

    let bbox = BoundingBox::from_array(best);
    Ok(Refinement {
        bbox,
        loss_dist: perimeter_distance_loss(&bbox, d)?,
        loss_rect: rectangularity_loss(&bbox)?,
        objective: best_f,
        initial_objective,
        evaluations,
    })
}

/// Line detection, distance map and box refinement on one image.
pub fn refine_on_image(
    img: &GrayImage,
    bbox0: &BoundingBox,
    lambda: f64,
    lines: &LineDetectorConfig,
    opts: &SearchOptions,
) -> Result<Refinement, RefineError> {
    let map = detect_line_map(img, lines)?;
    let d = distance_map(&map)?;
    refine_bbox(bbox0, &d, lambda, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::refine::LineMap;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn square_outline_map(size: usize, x0: usize, y0: usize, side: usize) -> DistanceMap {
        let mut m = LineMap::empty(size, size);
        for k in 0..=side {
            m.set(x0 + k, y0);
            m.set(x0 + k, y0 + side);
            m.set(x0, y0 + k);
            m.set(x0 + side, y0 + k);
        }
        distance_map(&m).unwrap()
    }

    #[test]
    fn fixed_point_on_clean_rectangle() {
        let d = square_outline_map(160, 30, 30, 100);
        let b0 = BoundingBox::new(30.0, 30.0, 130.0, 130.0);
        let r = refine_bbox(&b0, &d, 0.1, &SearchOptions::default()).unwrap();
        for (a, b) in r.bbox.as_array().iter().zip(b0.as_array()) {
            assert!((a - b).abs() <= 0.25);
        }
    }

    #[test]
    fn recovers_perturbed_square() {
        let d = square_outline_map(160, 30, 30, 100);
        let truth = [30.0, 30.0, 130.0, 130.0];
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut ok = 0;
        for _ in 0..200 {
            let mut b = truth;
            for v in &mut b {
                *v += rng.random_range(-5.0..=5.0);
            }
            let r = refine_bbox(&BoundingBox::from_array(b), &d, 0.1, &SearchOptions::default())
                .unwrap();
            if r.bbox.as_array().iter().zip(truth).all(|(a, t)| (a - t).abs() <= 1.0) {
                ok += 1;
            }
        }
        assert!(ok >= 190, "{ok}/200");
    }

    #[test]
    fn regularizer_squares_box_on_flat_field() {
        let d = DistanceMap::new(120, 120, vec![0.3; 120 * 120]).unwrap();
        let b0 = BoundingBox::new(50.0, 40.0, 60.0, 80.0);
        let r = refine_bbox(&b0, &d, 1.0, &SearchOptions::default()).unwrap();
        let aspect = r.bbox.width() / r.bbox.height();
        assert!((aspect - 1.0).abs() < 0.01, "aspect {aspect}");
        assert!(r.objective <= r.initial_objective);
    }

    #[test]
    fn lambda_range() {
        let d = DistanceMap::new(10, 10, vec![0.0; 100]).unwrap();
        let b = BoundingBox::new(1.0, 1.0, 5.0, 5.0);
        assert_eq!(
            refine_bbox(&b, &d, 1.5, &SearchOptions::default()),
            Err(RefineError::InvalidLambda(1.5))
        );
    }

    #[test]
    fn never_increases_objective() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..50 {
            let vals: Vec<f64> = (0..48 * 48).map(|_| rng.random()).collect();
            let d = DistanceMap::new(48, 48, vals).unwrap();
            let x1 = rng.random_range(0.0..20.0);
            let y1 = rng.random_range(0.0..20.0);
            let b0 = BoundingBox::new(x1, y1, x1 + rng.random_range(2.0..27.0), y1 + rng.random_range(2.0..27.0));
            let lambda = rng.random_range(0.0..=1.0);
            let r = refine_bbox(&b0, &d, lambda, &SearchOptions::default()).unwrap();
            assert!(r.objective <= objective(&b0, &d, lambda).unwrap() + 1e-12);
            assert!(r.evaluations <= 800);
        }
    }
}
