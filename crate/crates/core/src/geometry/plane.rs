use nalgebra::{Matrix3, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{GeometryError, Vec3};

/// Plane `normal · p = offset` with the inliers that support it.
#[derive(Clone, Debug, PartialEq)]
pub struct PlaneFit {
    pub normal: Vec3,
    pub offset: f64,
    pub inlier_indices: Vec<usize>,
    pub inlier_ratio: f64,
}

impl PlaneFit {
    pub fn signed_distance(&self, p: &Vec3) -> f64 {
        self.normal.dot(p) - self.offset
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RansacConfig {
    /// Inlier distance threshold in metres.
    pub threshold: f64,
    pub max_iters: usize,
    pub seed: u64,
}

impl Default for RansacConfig {
    fn default() -> Self {
        Self { threshold: 0.01, max_iters: 500, seed: 0 }
    }
}

/// RANSAC plane fit over random 3-point hypotheses followed by a
/// least-squares refit on the winning inlier set.
///
/// With `viewpoint`, the normal is oriented to point from the plane toward
/// it; otherwise its largest-magnitude component is made positive.
pub fn fit_plane_ransac(
    points: &[Vec3],
    cfg: &RansacConfig,
    viewpoint: Option<&Vec3>,
) -> Result<PlaneFit, GeometryError> {
    let n = points.len();
    if n < 3 {
        return Err(GeometryError::InsufficientPoints { got: n, need: 3 });
    }
    let thr = cfg.threshold;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut best: Option<(usize, Vec3, f64)> = None;

    for _ in 0..cfg.max_iters {
        let idx = rand::seq::index::sample(&mut rng, n, 3);
        let (a, b, c) = (points[idx.index(0)], points[idx.index(1)], points[idx.index(2)]);
        let (ab, ac) = (b - a, c - a);
        let cross = ab.cross(&ac);
        let scale = ab.norm() * ac.norm();
        let len = cross.norm();
        if !(len > 1e-12 * scale) || len == 0.0 {
            continue;
        }
        let normal = cross / len;
        let offset = normal.dot(&a);
        let count = points.iter().filter(|p| (normal.dot(p) - offset).abs() <= thr).count();
        if best.is_none_or(|(c, _, _)| count > c) {
            best = Some((count, normal, offset));
        }
    }

    let (count, mut normal, mut offset) = best.ok_or(GeometryError::DegenerateGeometry)?;
    let mut inliers = collect_inliers(points, &normal, offset, thr);

    if let Some((rn, ro)) = least_squares_plane(points, &inliers) {
        let refit = collect_inliers(points, &rn, ro, thr);
        if refit.len() >= 3 && refit.len() >= count {
            normal = rn;
            offset = ro;
            inliers = refit;
        }
    }

    let flip = match viewpoint {
        Some(v) => normal.dot(v) - offset < 0.0,
        None => {
            let i = normal.iamax();
            normal[i] < 0.0
        }
    };
    if flip {
        normal = -normal;
        offset = -offset;
    }

    let inlier_ratio = inliers.len() as f64 / n as f64;
    Ok(PlaneFit { normal, offset, inlier_indices: inliers, inlier_ratio })
}

fn collect_inliers(points: &[Vec3], normal: &Vec3, offset: f64, thr: f64) -> Vec<usize> {
    points
        .iter()
        .enumerate()
        .filter(|(_, p)| (normal.dot(p) - offset).abs() <= thr)
        .map(|(i, _)| i)
        .collect()
}

/// Total least squares: the normal is the smallest-eigenvalue eigenvector
/// of the inlier scatter matrix.
fn least_squares_plane(points: &[Vec3], idx: &[usize]) -> Option<(Vec3, f64)> {
    if idx.len() < 3 {
        return None;
    }
    let centroid = idx.iter().map(|&i| points[i]).sum::<Vec3>() / idx.len() as f64;
    let mut scatter = Matrix3::zeros();
    for &i in idx {
        let d = points[i] - centroid;
        scatter += d * d.transpose();
    }
    let eig = SymmetricEigen::new(scatter);
    let k = eig.eigenvalues.imin();
    let normal = eig.eigenvectors.column(k).into_owned().try_normalize(1e-15)?;
    Some((normal, normal.dot(&centroid)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_distr::{Distribution, Normal};

    fn grid_on_z0() -> Vec<Vec3> {
        (0..10)
            .flat_map(|i| (0..10).map(move |j| Vec3::new(i as f64 * 0.1, j as f64 * 0.1, 0.0)))
            .collect()
    }

    #[test]
    fn exact_plane() {
        let fit = fit_plane_ransac(&grid_on_z0(), &RansacConfig::default(), None).unwrap();
        assert!((fit.normal - Vec3::z()).norm() < 1e-12);
        assert!(fit.offset.abs() < 1e-12);
        assert_eq!(fit.inlier_ratio, 1.0);
    }

    #[test]
    fn orientation_toward_viewpoint() {
        let view = Vec3::new(0.5, 0.5, -2.0);
        let fit = fit_plane_ransac(&grid_on_z0(), &RansacConfig::default(), Some(&view)).unwrap();
        assert!((fit.normal + Vec3::z()).norm() < 1e-12);
        assert!(fit.signed_distance(&view) > 0.0);
    }

    #[test]
    fn noisy_plane_with_outliers() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let noise = Normal::new(0.0, 0.002).unwrap();
        let mut pts: Vec<Vec3> = (0..70)
            .map(|_| Vec3::new(rng.random(), rng.random(), 1.0 + noise.sample(&mut rng)))
            .collect();
        pts.extend((0..30).map(|_| Vec3::new(rng.random(), rng.random(), rng.random())));
        let fit = fit_plane_ransac(&pts, &RansacConfig { seed: 3, ..Default::default() }, None)
            .unwrap();
        let angle = fit.normal.dot(&Vec3::z()).abs().min(1.0).acos().to_degrees();
        assert!(angle < 2.0, "angle {angle}");
        assert!(fit.inlier_ratio >= 0.65, "ratio {}", fit.inlier_ratio);
        for &i in &fit.inlier_indices {
            assert!(fit.signed_distance(&pts[i]).abs() <= 0.01);
        }
    }

    #[test]
    fn too_few_points() {
        let pts = [Vec3::zeros(), Vec3::x()];
        assert_eq!(
            fit_plane_ransac(&pts, &RansacConfig::default(), None),
            Err(GeometryError::InsufficientPoints { got: 2, need: 3 })
        );
    }

    #[test]
    fn collinear_points_are_degenerate() {
        let pts: Vec<Vec3> = (0..10).map(|i| Vec3::new(i as f64, 0.0, 0.0)).collect();
        assert_eq!(
            fit_plane_ransac(&pts, &RansacConfig::default(), None),
            Err(GeometryError::DegenerateGeometry)
        );
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let pts: Vec<Vec3> =
            (0..200).map(|_| Vec3::new(rng.random(), rng.random(), rng.random())).collect();
        let cfg = RansacConfig { seed: 42, ..Default::default() };
        assert_eq!(fit_plane_ransac(&pts, &cfg, None), fit_plane_ransac(&pts, &cfg, None));
    }
}
