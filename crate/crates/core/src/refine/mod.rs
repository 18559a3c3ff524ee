//! Bounding-box refinement against image line features.
//!
//! A grayscale image is turned into a binary [`LineMap`] (Sobel edges, Otsu
//! threshold, probabilistic Hough segments), the map into a normalized
//! [`DistanceMap`], and the box is moved by a compass search minimizing the
//! perimeter distance loss plus a squareness regularizer.

mod distance;
mod lines;
mod loss;
mod search;

use thiserror::Error;

pub use distance::{distance_map, euclidean_distance_transform, DistanceMap};
pub use lines::{detect_line_map, detect_segments, LineDetectorConfig, LineMap, Segment};
pub use loss::{perimeter_distance_loss, perimeter_samples, rectangularity_loss};
pub use search::{objective, refine_bbox, refine_on_image, Refinement, SearchOptions};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RefineError {
    #[error("image is empty")]
    EmptyImage,
    #[error("line map contains no line pixels")]
    NoLinePixels,
    #[error("perimeter sample ({x:.2}, {y:.2}) lies outside the image domain")]
    OutOfDomain { x: f64, y: f64 },
    #[error("box has zero or negative width/height")]
    DegenerateBox,
    #[error("lambda must lie in [0, 1], got {0}")]
    InvalidLambda(f64),
    #[error("invalid distance map: {0}")]
    InvalidDistanceMap(String),
}
