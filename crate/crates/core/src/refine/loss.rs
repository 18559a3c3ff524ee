use super::{DistanceMap, RefineError};
use crate::bbox::BoundingBox;

/// Perimeter sample positions, one per pixel of arc length along each side
/// (each side includes its start corner, excludes its end corner).
pub fn perimeter_samples(b: &BoundingBox) -> Vec<(f64, f64)> {
    let corners = [(b.x1, b.y1), (b.x2, b.y1), (b.x2, b.y2), (b.x1, b.y2)];
    let mut out = Vec::new();
    for i in 0..4 {
        let (a, c) = (corners[i], corners[(i + 1) % 4]);
        let len = (c.0 - a.0).hypot(c.1 - a.1);
        let n = len.ceil().max(1.0) as usize;
        for k in 0..n {
            let t = k as f64 / n as f64;
            out.push((a.0 + t * (c.0 - a.0), a.1 + t * (c.1 - a.1)));
        }
    }
    out
}

/// Mean of the bilinearly sampled distance map over the box perimeter.
pub fn perimeter_distance_loss(b: &BoundingBox, d: &DistanceMap) -> Result<f64, RefineError> {
    let samples = perimeter_samples(b);
    let mut sum = 0.0;
    for &(x, y) in &samples {
        if !d.contains(x, y) {
            return Err(RefineError::OutOfDomain { x, y });
        }
        sum += d.sample(x, y);
    }
    Ok(sum / samples.len() as f64)
}

/// `1 - A_rect / A_square`, where `A_square` is the smallest enclosing square.
pub fn rectangularity_loss(b: &BoundingBox) -> Result<f64, RefineError> {
    let (w, h) = (b.width(), b.height());
    if !(w > 0.0 && h > 0.0) {
        return Err(RefineError::DegenerateBox);
    }
    let side = w.max(h);
    Ok(1.0 - (w * h) / (side * side))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn constant(c: f64) -> DistanceMap {
        DistanceMap::new(64, 64, vec![c; 64 * 64]).unwrap()
    }

    #[test]
    fn rect_loss_values() {
        assert_eq!(rectangularity_loss(&BoundingBox::new(0.0, 0.0, 50.0, 50.0)), Ok(0.0));
        assert_eq!(rectangularity_loss(&BoundingBox::new(0.0, 0.0, 10.0, 20.0)), Ok(0.5));
        let l = rectangularity_loss(&BoundingBox::new(0.0, 0.0, 1.0, 100.0)).unwrap();
        assert!((l - 0.99).abs() < 1e-15);
        assert_eq!(
            rectangularity_loss(&BoundingBox::new(0.0, 0.0, 0.0, 10.0)),
            Err(RefineError::DegenerateBox)
        );
    }

    #[test]
    fn constant_fields() {
        let b = BoundingBox::new(3.2, 4.0, 40.7, 22.5);
        assert_eq!(perimeter_distance_loss(&b, &constant(0.0)), Ok(0.0));
        assert!((perimeter_distance_loss(&b, &constant(1.0)).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sample_count_tracks_perimeter() {
        let b = BoundingBox::new(0.0, 0.0, 10.0, 5.0);
        assert_eq!(perimeter_samples(&b).len(), 30);
    }

    #[test]
    fn out_of_domain() {
        let b = BoundingBox::new(-0.5, 0.0, 10.0, 10.0);
        assert!(matches!(
            perimeter_distance_loss(&b, &constant(0.5)),
            Err(RefineError::OutOfDomain { .. })
        ));
    }

    proptest! {
        #[test]
        fn rect_loss_scale_invariant(
            x1 in 0.0..50.0f64, y1 in 0.0..50.0f64, w in 0.5..80.0f64, h in 0.5..80.0f64,
            s in 0.01..100.0f64,
        ) {
            let b = BoundingBox::new(x1, y1, x1 + w, y1 + h);
            let a = rectangularity_loss(&b).unwrap();
            let c = rectangularity_loss(&b.scaled(s)).unwrap();
            prop_assert!((a - c).abs() < 1e-12);
            prop_assert!((0.0..1.0).contains(&a));
        }

        #[test]
        fn dist_loss_linear_in_field_scale(seed in 0u64..500, c in 0.0..=1.0f64) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let vals: Vec<f64> = (0..32 * 32).map(|_| rng.random()).collect();
            let d = DistanceMap::new(32, 32, vals).unwrap();
            let b = BoundingBox::new(
                rng.random_range(0.0..10.0), rng.random_range(0.0..10.0),
                rng.random_range(15.0..31.0), rng.random_range(15.0..31.0),
            );
            let base = perimeter_distance_loss(&b, &d).unwrap();
            let scaled = perimeter_distance_loss(&b, &d.scaled(c).unwrap()).unwrap();
            prop_assert!((scaled - c * base).abs() < 1e-12);
        }
    }
}
