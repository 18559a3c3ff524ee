use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::MetricsError;
use crate::bbox::BoundingBox;

/// IoU thresholds 0.50:0.05:0.95.
pub const IOU_THRESHOLDS: [f64; 10] = [0.5, 0.55, 0.6, 0.65, 0.7, 0.75, 0.8, 0.85, 0.9, 0.95];
/// Confidence cut-off for the precision/recall operating point.
pub const OPERATING_CONFIDENCE: f64 = 0.5;

/// A predicted or ground-truth box. Ground truth carries no confidence.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectionRecord {
    pub image_id: String,
    pub bbox: BoundingBox,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confidence: Option<f64>,
    #[serde(rename = "class")]
    pub label: String,
}

impl DetectionRecord {
    pub fn prediction(image_id: &str, bbox: BoundingBox, confidence: f64, label: &str) -> Self {
        Self { image_id: image_id.into(), bbox, confidence: Some(confidence), label: label.into() }
    }

    pub fn ground_truth(image_id: &str, bbox: BoundingBox, label: &str) -> Self {
        Self { image_id: image_id.into(), bbox, confidence: None, label: label.into() }
    }

    fn score(&self) -> f64 {
        self.confidence.unwrap_or(1.0)
    }

    pub fn validate(&self) -> Result<(), MetricsError> {
        if let Some(c) = self.confidence {
            if !(0.0..=1.0).contains(&c) {
                return Err(MetricsError::InvalidRecord(format!("confidence {c} outside [0, 1]")));
            }
        }
        if !self.bbox.is_valid() {
            return Err(MetricsError::InvalidRecord(format!("invalid box {:?}", self.bbox.as_array())));
        }
        Ok(())
    }
}

pub fn iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let inter = a.intersection_area(b);
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        0.0
    } else {
        (inter / union).clamp(0.0, 1.0)
    }
}

/// Indices of `preds` sorted by descending confidence, ties by input order.
fn ranked(preds: &[DetectionRecord]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..preds.len()).collect();
    order.sort_by(|&a, &b| preds[b].score().total_cmp(&preds[a].score()));
    order
}

/// Greedy matching in rank order: each prediction takes the unmatched
/// ground truth of the same image and class with the highest IoU ≥ `thresh`
/// (first on ties). Returns a TP flag per ranked prediction, with the order.
pub fn match_predictions(
    preds: &[DetectionRecord],
    gts: &[DetectionRecord],
    thresh: f64,
) -> (Vec<usize>, Vec<bool>) {
    let order = ranked(preds);
    let mut taken = vec![false; gts.len()];
    let mut tp = Vec::with_capacity(order.len());
    for &i in &order {
        let p = &preds[i];
        let mut best: Option<(usize, f64)> = None;
        for (j, g) in gts.iter().enumerate() {
            if taken[j] || g.image_id != p.image_id || g.label != p.label {
                continue;
            }
            let o = iou(&p.bbox, &g.bbox);
            if o >= thresh && best.is_none_or(|(_, b)| o > b) {
                best = Some((j, o));
            }
        }
        if let Some((j, _)) = best {
            taken[j] = true;
        }
        tp.push(best.is_some());
    }
    (order, tp)
}

/// All-points interpolated AP over the pooled records. Zero without ground
/// truth.
pub fn average_precision(preds: &[DetectionRecord], gts: &[DetectionRecord], iou_thresh: f64) -> f64 {
    if gts.is_empty() {
        return 0.0;
    }
    let (_, tp) = match_predictions(preds, gts, iou_thresh);
    let n_gt = gts.len() as f64;
    let mut precision = Vec::with_capacity(tp.len());
    let mut hits = 0usize;
    for (k, &t) in tp.iter().enumerate() {
        hits += t as usize;
        precision.push(hits as f64 / (k + 1) as f64);
    }
    for k in (0..precision.len().saturating_sub(1)).rev() {
        precision[k] = precision[k].max(precision[k + 1]);
    }
    // Recall grows by exactly 1/n_gt at each true positive.
    let ap: f64 = tp.iter().zip(&precision).filter(|(t, _)| **t).map(|(_, p)| p / n_gt).sum();
    ap.clamp(0.0, 1.0)
}

/// Mean of per-class AP over the classes present in the ground truth.
pub fn mean_average_precision(preds: &[DetectionRecord], gts: &[DetectionRecord], iou_thresh: f64) -> f64 {
    let classes: BTreeSet<&str> = gts.iter().map(|g| g.label.as_str()).collect();
    if classes.is_empty() {
        return 0.0;
    }
    let total: f64 = classes
        .iter()
        .map(|c| {
            let p: Vec<DetectionRecord> = preds.iter().filter(|r| r.label == *c).cloned().collect();
            let g: Vec<DetectionRecord> = gts.iter().filter(|r| r.label == *c).cloned().collect();
            average_precision(&p, &g, iou_thresh)
        })
        .sum();
    total / classes.len() as f64
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectionSummary {
    pub map50: f64,
    pub map50_95: f64,
    pub precision: f64,
    pub recall: f64,
}

pub fn detection_summary(
    preds: &[DetectionRecord],
    gts: &[DetectionRecord],
) -> Result<DetectionSummary, MetricsError> {
    for r in preds.iter().chain(gts) {
        r.validate()?;
    }
    let map50 = mean_average_precision(preds, gts, 0.5);
    let map50_95 =
        IOU_THRESHOLDS.iter().map(|&t| mean_average_precision(preds, gts, t)).sum::<f64>() / IOU_THRESHOLDS.len() as f64;

    let confident: Vec<DetectionRecord> =
        preds.iter().filter(|p| p.score() >= OPERATING_CONFIDENCE).cloned().collect();
    let (_, tp) = match_predictions(&confident, gts, 0.5);
    let hits = tp.iter().filter(|t| **t).count() as f64;
    let precision = if confident.is_empty() { 0.0 } else { hits / confident.len() as f64 };
    let recall = if gts.is_empty() { 0.0 } else { hits / gts.len() as f64 };
    Ok(DetectionSummary { map50, map50_95, precision, recall })
}
