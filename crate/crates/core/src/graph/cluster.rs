use serde::{Deserialize, Serialize};

use super::GraphError;
use crate::bbox::BoundingBox;
use crate::geometry::Vec3;

pub const DEFAULT_CLUSTER_RADIUS: f64 = 0.15;

/// A 2D detection lifted into the world frame.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Detection3D {
    #[serde(with = "crate::serde_vec::vec3")]
    pub position: Vec3,
    pub confidence: f64,
    #[serde(rename = "frame")]
    pub source_frame: String,
    pub bbox: BoundingBox,
    /// Interaction normal when the producer estimated one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub normal: Option<[f64; 3]>,
}

impl Detection3D {
    pub fn new(position: Vec3, confidence: f64, source_frame: impl Into<String>, bbox: BoundingBox) -> Self {
        Self { position, confidence, source_frame: source_frame.into(), bbox, normal: None }
    }

    pub fn validate(&self) -> Result<(), GraphError> {
        if !(0.0..=1.0).contains(&self.confidence) {
            return Err(GraphError::InvalidDetection(format!(
                "confidence {} outside [0, 1]",
                self.confidence
            )));
        }
        if !self.position.iter().all(|v| v.is_finite()) {
            return Err(GraphError::InvalidDetection("non-finite position".into()));
        }
        Ok(())
    }
}

/// Detections believed to be the same physical element.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Cluster {
    #[serde(with = "crate::serde_vec::vec3")]
    pub centroid: Vec3,
    /// Highest-confidence member.
    pub representative: Detection3D,
    /// Indices into the input slice, in joining order.
    pub members: Vec<usize>,
}

/// Greedy clustering in descending confidence order (ties by input order).
///
/// A detection joins the nearest cluster whose centroid is within `radius`;
/// otherwise it starts a new one. Centroids are member means.
pub fn cluster_detections(dets: &[Detection3D], radius: f64) -> Result<Vec<Cluster>, GraphError> {
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(GraphError::InvalidRadius(radius));
    }
    for d in dets {
        d.validate()?;
    }
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&a, &b| dets[b].confidence.total_cmp(&dets[a].confidence));

    let mut clusters: Vec<(Vec3, Vec3, Vec<usize>)> = Vec::new(); // (centroid, sum, members)
    for i in order {
        let p = dets[i].position;
        let nearest = clusters
            .iter()
            .enumerate()
            .map(|(k, c)| (k, (c.0 - p).norm()))
            .filter(|(_, d)| *d <= radius)
            .min_by(|a, b| a.1.total_cmp(&b.1));
        match nearest {
            Some((k, _)) => {
                let c = &mut clusters[k];
                c.1 += p;
                c.2.push(i);
                c.0 = c.1 / c.2.len() as f64;
            }
            None => clusters.push((p, p, vec![i])),
        }
    }
    Ok(clusters
        .into_iter()
        .map(|(centroid, _, members)| Cluster {
            centroid,
            representative: dets[members[0]].clone(),
            members,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Vector3;

    fn det(x: f64, conf: f64) -> Detection3D {
        Detection3D::new(Vector3::new(x, 0.0, 1.0), conf, "f0", BoundingBox::new(0.0, 0.0, 1.0, 1.0))
    }

    #[test]
    fn merges_close_detections() {
        let c = cluster_detections(&[det(0.0, 0.6), det(0.05, 0.9)], 0.15).unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].representative.confidence, 0.9);
        assert_eq!(c[0].members, vec![1, 0]);
        assert!((c[0].centroid.x - 0.025).abs() < 1e-12);
    }

    #[test]
    fn separates_far_detections() {
        let c = cluster_detections(&[det(0.0, 0.6), det(1.0, 0.9)], 0.15).unwrap();
        assert_eq!(c.len(), 2);
        assert!(cluster_detections(&[], 0.15).unwrap().is_empty());
        assert!(cluster_detections(&[], 0.0).is_err());
        assert!(cluster_detections(&[det(0.0, 1.5)], 0.1).is_err());
    }
}
