use nalgebra::{Matrix3, SymmetricEigen};

use super::{GeometryError, Vec3};

/// Dominant direction of a point cloud: the covariance eigenvector with the
/// largest eigenvalue, signed so its largest-magnitude component is positive.
pub fn principal_axis(points: &[Vec3]) -> Result<Vec3, GeometryError> {
    let distinct = points.first().is_some_and(|p0| points.iter().any(|p| p != p0));
    if points.len() < 2 || !distinct {
        return Err(GeometryError::InsufficientPoints { got: points.len(), need: 2 });
    }
    let mean = points.iter().sum::<Vec3>() / points.len() as f64;
    let mut cov = Matrix3::zeros();
    for p in points {
        let d = p - mean;
        cov += d * d.transpose();
    }
    cov /= points.len() as f64;

    let eig = SymmetricEigen::new(cov);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let (l1, l2) = (eig.eigenvalues[order[0]], eig.eigenvalues[order[1]]);
    if l1 - l2 <= 1e-9 * l1.abs() {
        return Err(GeometryError::IsotropicCloud);
    }
    let mut axis = eig.eigenvectors.column(order[0]).into_owned().normalize();
    if axis[axis.iamax()] < 0.0 {
        axis = -axis;
    }
    Ok(axis)
}
