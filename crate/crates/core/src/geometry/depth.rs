use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::GeometryError;
use crate::error::Error;

/// Row-major z-depth in metres. Values `<= 0` or non-finite mark missing
/// measurements.
#[derive(Clone, Debug, PartialEq)]
pub struct DepthImage {
    width: usize,
    height: usize,
    values: Vec<f32>,
}

/// JSON sidecar describing a raw depth file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DepthSidecar {
    pub width: usize,
    pub height: usize,
    pub unit: String,
}

impl DepthImage {
    pub fn new(width: usize, height: usize, values: Vec<f32>) -> Result<Self, GeometryError> {
        if values.len() != width * height {
            return Err(GeometryError::InvalidDepthImage(format!(
                "{} values for a {width}x{height} image",
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| v.is_finite() && *v < 0.0) {
            return Err(GeometryError::InvalidDepthImage(format!(
                "negative depth {} at index {i}",
                values[i]
            )));
        }
        Ok(Self { width, height, values })
    }

    pub fn filled(width: usize, height: usize, depth: f32) -> Self {
        Self { width, height, values: vec![depth; width * height] }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn raw(&self, u: usize, v: usize) -> f32 {
        self.values[v * self.width + u]
    }

    /// Valid depth at an integer pixel, or `None`.
    pub fn get(&self, u: usize, v: usize) -> Option<f64> {
        if u >= self.width || v >= self.height {
            return None;
        }
        let d = self.values[v * self.width + u];
        (d.is_finite() && d > 0.0).then_some(d as f64)
    }

    /// Path of the JSON sidecar for a raw depth file: `<path>.json`.
    pub fn sidecar_path(path: &Path) -> PathBuf {
        let mut s = path.as_os_str().to_owned();
        s.push(".json");
        PathBuf::from(s)
    }

    /// Reads little-endian f32 values plus the `<path>.json` sidecar.
    pub fn read(path: &Path) -> Result<Self, Error> {
        let side_path = Self::sidecar_path(path);
        let side_text = std::fs::read_to_string(&side_path)
            .map_err(|source| Error::Io { path: side_path.display().to_string(), source })?;
        let side: DepthSidecar = serde_json::from_str(&side_text).map_err(|e| {
            GeometryError::InvalidDepthImage(format!("sidecar {}: {e}", side_path.display()))
        })?;
        if side.unit != "m" {
            return Err(GeometryError::InvalidDepthImage(format!(
                "unsupported unit {:?}, expected \"m\"",
                side.unit
            ))
            .into());
        }
        let bytes = std::fs::read(path)
            .map_err(|source| Error::Io { path: path.display().to_string(), source })?;
        Ok(Self::from_le_bytes(side.width, side.height, &bytes)?)
    }

    pub fn from_le_bytes(width: usize, height: usize, bytes: &[u8]) -> Result<Self, GeometryError> {
        if bytes.len() != width * height * 4 {
            return Err(GeometryError::InvalidDepthImage(format!(
                "expected {} bytes for {width}x{height}, got {}",
                width * height * 4,
                bytes.len()
            )));
        }
        let values = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        Self::new(width, height, values)
    }

    pub fn to_le_bytes(&self) -> Vec<u8> {
        self.values.iter().flat_map(|v| v.to_le_bytes()).collect()
    }

    pub fn write(&self, path: &Path) -> Result<(), Error> {
        std::fs::write(path, self.to_le_bytes())
            .map_err(|source| Error::Io { path: path.display().to_string(), source })?;
        let side = DepthSidecar { width: self.width, height: self.height, unit: "m".into() };
        let side_path = Self::sidecar_path(path);
        std::fs::write(&side_path, serde_json::to_string(&side).expect("sidecar serializes"))
            .map_err(|source| Error::Io { path: side_path.display().to_string(), source })?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn invalid_markers() {
        let d = DepthImage::new(3, 1, vec![0.0, f32::NAN, 1.5]).unwrap();
        assert_eq!(d.get(0, 0), None);
        assert_eq!(d.get(1, 0), None);
        assert_eq!(d.get(2, 0), Some(1.5));
        assert_eq!(d.get(3, 0), None);
        assert!(DepthImage::new(2, 1, vec![1.0, -1.0]).is_err());
        assert!(DepthImage::new(2, 2, vec![1.0]).is_err());
    }

    #[test]
    fn disk_roundtrip_with_sidecar() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("depth.f32");
        let d = DepthImage::new(2, 2, vec![1.0, 2.0, 0.0, 4.25]).unwrap();
        d.write(&path).unwrap();
        let side = std::fs::read_to_string(dir.path().join("depth.f32.json")).unwrap();
        assert_eq!(side, r#"{"width":2,"height":2,"unit":"m"}"#);
        assert_eq!(std::fs::read(&path).unwrap().len(), 16);
        assert_eq!(DepthImage::read(&path).unwrap(), d);
    }
}
