//! Success-rate confidence intervals and detection metrics.

mod detection;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use detection::{
    average_precision, detection_summary, iou, match_predictions, mean_average_precision, DetectionRecord,
    DetectionSummary, IOU_THRESHOLDS, OPERATING_CONFIDENCE,
};

pub const Z_95: f64 = 1.96;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("invalid counts: {n_success} successes out of {n_attempt} attempts")]
    InvalidCounts { n_success: u64, n_attempt: u64 },
    #[error("invalid detection record: {0}")]
    InvalidRecord(String),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CiMethod {
    #[default]
    Wald,
    Wilson,
}

/// Success rate with a two-sided 95% interval, all as fractions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuccessRate {
    pub sr: f64,
    pub lo: f64,
    pub hi: f64,
}

/// Wald interval `p ± 1.96·√(p(1−p)/n)`, clamped to [0, 1].
pub fn success_rate_ci(n_success: u64, n_attempt: u64) -> Result<SuccessRate, MetricsError> {
    success_rate_ci_with(n_success, n_attempt, CiMethod::Wald)
}

pub fn success_rate_ci_with(n_success: u64, n_attempt: u64, method: CiMethod) -> Result<SuccessRate, MetricsError> {
    if n_attempt == 0 || n_success > n_attempt {
        return Err(MetricsError::InvalidCounts { n_success, n_attempt });
    }
    let n = n_attempt as f64;
    let p = n_success as f64 / n;
    let (lo, hi) = match method {
        CiMethod::Wald => {
            let half = Z_95 * (p * (1.0 - p) / n).sqrt();
            (p - half, p + half)
        }
        CiMethod::Wilson => {
            let z2 = Z_95 * Z_95;
            let denom = 1.0 + z2 / n;
            let centre = p + z2 / (2.0 * n);
            let half = Z_95 * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
            ((centre - half) / denom, (centre + half) / denom)
        }
    };
    Ok(SuccessRate { sr: p, lo: lo.clamp(0.0, 1.0), hi: hi.clamp(0.0, 1.0) })
}
