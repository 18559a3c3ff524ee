use image::GrayImage;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::RefineError;

/// Binary line image, 1 = line pixel.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LineMap {
    width: usize,
    height: usize,
    values: Vec<u8>,
}

impl LineMap {
    pub fn empty(width: usize, height: usize) -> Self {
        Self { width, height, values: vec![0; width * height] }
    }

    /// Values other than 0/1 are rejected.
    pub fn from_values(width: usize, height: usize, values: Vec<u8>) -> Option<Self> {
        (values.len() == width * height && values.iter().all(|&v| v <= 1))
            .then_some(Self { width, height, values })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[u8] {
        &self.values
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.values[y * self.width + x] == 1
    }

    pub fn set(&mut self, x: usize, y: usize) {
        self.values[y * self.width + x] = 1;
    }

    pub fn count(&self) -> usize {
        self.values.iter().filter(|&&v| v == 1).count()
    }

    /// Rasterizes a segment with a DDA walk.
    pub fn draw_segment(&mut self, s: &Segment) {
        let (dx, dy) = (s.x1 - s.x0, s.y1 - s.y0);
        let steps = dx.abs().max(dy.abs()).ceil().max(1.0) as usize;
        for i in 0..=steps {
            let t = i as f64 / steps as f64;
            let (x, y) = ((s.x0 + t * dx).round(), (s.y0 + t * dy).round());
            if x >= 0.0 && y >= 0.0 && (x as usize) < self.width && (y as usize) < self.height {
                self.set(x as usize, y as usize);
            }
        }
    }
}

/// Line segment between two pixel positions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Segment {
    pub fn length(&self) -> f64 {
        (self.x1 - self.x0).hypot(self.y1 - self.y0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LineDetectorConfig {
    /// Accumulator votes needed before a line walk is attempted.
    pub vote_threshold: u32,
    /// Shortest accepted segment, pixels.
    pub min_line_length: f64,
    /// Largest run of missing edge pixels bridged while walking a line.
    pub max_line_gap: usize,
    /// Angular resolution of the accumulator (bins over [0, pi)).
    pub theta_bins: usize,
    /// Parallel segments closer than this (and within `merge_angle_deg`) are
    /// fused into their centre line; a thin dark stroke yields one edge on
    /// each side.
    pub merge_distance_px: f64,
    pub merge_angle_deg: f64,
    /// Seed of the point-visiting order.
    pub seed: u64,
}

impl Default for LineDetectorConfig {
    fn default() -> Self {
        Self {
            vote_threshold: 10,
            min_line_length: 8.0,
            max_line_gap: 3,
            theta_bins: 180,
            merge_distance_px: 3.0,
            merge_angle_deg: 2.0,
            seed: 0,
        }
    }
}

/// Sobel gradient magnitude with replicated borders.
fn sobel_magnitude(img: &GrayImage) -> Vec<f64> {
    let (w, h) = (img.width() as usize, img.height() as usize);
    let px = |x: isize, y: isize| -> f64 {
        let xc = x.clamp(0, w as isize - 1) as u32;
        let yc = y.clamp(0, h as isize - 1) as u32;
        img.get_pixel(xc, yc).0[0] as f64
    };
    let mut mag = vec![0.0; w * h];
    for y in 0..h as isize {
        for x in 0..w as isize {
            let gx = (px(x + 1, y - 1) + 2.0 * px(x + 1, y) + px(x + 1, y + 1))
                - (px(x - 1, y - 1) + 2.0 * px(x - 1, y) + px(x - 1, y + 1));
            let gy = (px(x - 1, y + 1) + 2.0 * px(x, y + 1) + px(x + 1, y + 1))
                - (px(x - 1, y - 1) + 2.0 * px(x, y - 1) + px(x + 1, y - 1));
            mag[y as usize * w + x as usize] = gx.hypot(gy);
        }
    }
    mag
}

/// Otsu threshold over a 256-bin histogram of `values` on `[0, max]`.
/// Returns the smallest value counted as foreground, or `None` when the
/// input is constant.
fn otsu_threshold(values: &[f64]) -> Option<f64> {
    let max = values.iter().copied().fold(0.0, f64::max);
    if !(max > 0.0) {
        return None;
    }
    const BINS: usize = 256;
    let bin = |v: f64| (((v / max) * BINS as f64) as usize).min(BINS - 1);
    let mut hist = [0usize; BINS];
    for &v in values {
        hist[bin(v)] += 1;
    }
    let total = values.len() as f64;
    let sum_all: f64 = hist.iter().enumerate().map(|(i, &c)| i as f64 * c as f64).sum();
    let (mut w0, mut sum0) = (0.0, 0.0);
    let (mut best_k, mut best_var) = (None, -1.0);
    for (k, &c) in hist.iter().enumerate().take(BINS - 1) {
        w0 += c as f64;
        sum0 += k as f64 * c as f64;
        let w1 = total - w0;
        if w0 == 0.0 || w1 == 0.0 {
            continue;
        }
        let (m0, m1) = (sum0 / w0, (sum_all - sum0) / w1);
        let var = w0 * w1 * (m0 - m1) * (m0 - m1);
        if var > best_var {
            best_var = var;
            best_k = Some(k);
        }
    }
    best_k.map(|k| (k + 1) as f64 * max / BINS as f64)
}

fn edge_mask(img: &GrayImage) -> Vec<bool> {
    let mag = sobel_magnitude(img);
    match otsu_threshold(&mag) {
        Some(t) => mag.iter().map(|&m| m > 0.0 && m >= t).collect(),
        None => vec![false; mag.len()],
    }
}

/// Progressive probabilistic Hough transform over a binary edge mask.
fn probabilistic_hough(mask: &[bool], w: usize, h: usize, cfg: &LineDetectorConfig) -> Vec<Segment> {
    let numangle = cfg.theta_bins.max(1);
    let offset = (w + h) as isize;
    let numrho = 2 * (w + h) + 1;
    let trig: Vec<(f64, f64)> = (0..numangle)
        .map(|k| {
            let t = k as f64 * std::f64::consts::PI / numangle as f64;
            (t.cos(), t.sin())
        })
        .collect();
    let rho_bin = |x: usize, y: usize, k: usize| -> usize {
        let (c, s) = trig[k];
        ((x as f64 * c + y as f64 * s).round() as isize + offset) as usize
    };

    let mut avail: Vec<bool> = mask.to_vec();
    let mut voted = vec![false; w * h];
    let mut accum = vec![0i32; numangle * numrho];
    let mut points: Vec<(usize, usize)> =
        (0..w * h).filter(|&i| mask[i]).map(|i| (i % w, i / w)).collect();
    points.shuffle(&mut ChaCha8Rng::seed_from_u64(cfg.seed));

    let mut segments = Vec::new();
    for (x, y) in points {
        let idx = y * w + x;
        if !avail[idx] {
            continue;
        }
        let (mut best_votes, mut best_k) = (0, 0);
        for k in 0..numangle {
            let a = &mut accum[k * numrho + rho_bin(x, y, k)];
            *a += 1;
            if *a > best_votes {
                best_votes = *a;
                best_k = k;
            }
        }
        voted[idx] = true;
        if (best_votes as u32) < cfg.vote_threshold {
            continue;
        }

        // Walk along the line direction; the normal is (cos, sin).
        let (c, s) = trig[best_k];
        let (dirx, diry) = (-s, c);
        let (sx, sy) = if dirx.abs() >= diry.abs() {
            (dirx.signum(), diry / dirx.abs())
        } else {
            (dirx / diry.abs(), diry.signum())
        };
        let walk = |sign: f64, avail: &[bool]| -> Vec<(usize, usize)> {
            let mut out = Vec::new();
            let (mut fx, mut fy) = (x as f64, y as f64);
            let mut gap = 0;
            let mut last_hit = 0;
            loop {
                fx += sign * sx;
                fy += sign * sy;
                let (rx, ry) = (fx.round(), fy.round());
                if rx < 0.0 || ry < 0.0 || rx >= w as f64 || ry >= h as f64 {
                    break;
                }
                let p = (rx as usize, ry as usize);
                out.push(p);
                if avail[p.1 * w + p.0] {
                    gap = 0;
                    last_hit = out.len();
                } else {
                    gap += 1;
                    if gap > cfg.max_line_gap {
                        break;
                    }
                }
            }
            out.truncate(last_hit);
            out
        };
        let fwd = walk(1.0, &avail);
        let bwd = walk(-1.0, &avail);
        let end_f = fwd.last().copied().unwrap_or((x, y));
        let end_b = bwd.last().copied().unwrap_or((x, y));
        let seg = Segment {
            x0: end_b.0 as f64,
            y0: end_b.1 as f64,
            x1: end_f.0 as f64,
            y1: end_f.1 as f64,
        };
        let good = seg.length() >= cfg.min_line_length;

        for (px, py) in std::iter::once((x, y)).chain(fwd).chain(bwd) {
            let i = py * w + px;
            if !avail[i] {
                continue;
            }
            if good && voted[i] {
                for k in 0..numangle {
                    accum[k * numrho + rho_bin(px, py, k)] -= 1;
                }
                voted[i] = false;
            }
            avail[i] = false;
        }
        if good {
            segments.push(seg);
        }
    }
    segments
}

/// Segment in normal form plus extent along its direction.
#[derive(Clone, Copy, Debug)]
struct LineGroup {
    dir: (f64, f64),
    mid: (f64, f64),
    t0: f64,
    t1: f64,
    weight: f64,
}

impl LineGroup {
    fn from_segment(s: &Segment) -> Self {
        let len = s.length().max(1e-12);
        let mut dir = ((s.x1 - s.x0) / len, (s.y1 - s.y0) / len);
        if dir.0 < 0.0 || (dir.0 == 0.0 && dir.1 < 0.0) {
            dir = (-dir.0, -dir.1);
        }
        let mid = (0.5 * (s.x0 + s.x1), 0.5 * (s.y0 + s.y1));
        Self { dir, mid, t0: -0.5 * len, t1: 0.5 * len, weight: 1.0 }
    }

    fn endpoints(&self) -> [(f64, f64); 2] {
        [
            (self.mid.0 + self.t0 * self.dir.0, self.mid.1 + self.t0 * self.dir.1),
            (self.mid.0 + self.t1 * self.dir.0, self.mid.1 + self.t1 * self.dir.1),
        ]
    }

    fn perp_dist(&self, p: (f64, f64)) -> f64 {
        let (dx, dy) = (p.0 - self.mid.0, p.1 - self.mid.1);
        (dx * self.dir.1 - dy * self.dir.0).abs()
    }

    fn project(&self, p: (f64, f64)) -> f64 {
        (p.0 - self.mid.0) * self.dir.0 + (p.1 - self.mid.1) * self.dir.1
    }

    fn to_segment(self) -> Segment {
        let [a, b] = self.endpoints();
        Segment { x0: a.0, y0: a.1, x1: b.0, y1: b.1 }
    }
}

fn try_merge(a: &LineGroup, b: &LineGroup, cfg: &LineDetectorConfig) -> Option<LineGroup> {
    let cos = (a.dir.0 * b.dir.0 + a.dir.1 * b.dir.1).abs().min(1.0);
    if cos.acos().to_degrees() > cfg.merge_angle_deg {
        return None;
    }
    if a.perp_dist(b.mid) > cfg.merge_distance_px || b.perp_dist(a.mid) > cfg.merge_distance_px {
        return None;
    }
    let [b0, b1] = b.endpoints();
    let (bt0, bt1) = {
        let (p, q) = (a.project(b0), a.project(b1));
        (p.min(q), p.max(q))
    };
    if bt0 > a.t1 + cfg.max_line_gap as f64 || bt1 < a.t0 - cfg.max_line_gap as f64 {
        return None;
    }
    let wsum = a.weight + b.weight;
    let sign = if a.dir.0 * b.dir.0 + a.dir.1 * b.dir.1 < 0.0 { -1.0 } else { 1.0 };
    let dx = a.weight * a.dir.0 + b.weight * sign * b.dir.0;
    let dy = a.weight * a.dir.1 + b.weight * sign * b.dir.1;
    let n = dx.hypot(dy);
    let mut merged = LineGroup {
        dir: (dx / n, dy / n),
        mid: (
            (a.weight * a.mid.0 + b.weight * b.mid.0) / wsum,
            (a.weight * a.mid.1 + b.weight * b.mid.1) / wsum,
        ),
        t0: 0.0,
        t1: 0.0,
        weight: wsum,
    };
    let ts: Vec<f64> = a.endpoints().into_iter().chain([b0, b1]).map(|p| merged.project(p)).collect();
    merged.t0 = ts.iter().copied().fold(f64::INFINITY, f64::min);
    merged.t1 = ts.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Some(merged)
}

fn merge_parallel(segments: Vec<Segment>, cfg: &LineDetectorConfig) -> Vec<Segment> {
    let mut groups: Vec<LineGroup> = segments.iter().map(LineGroup::from_segment).collect();
    'outer: loop {
        for i in 0..groups.len() {
            for j in i + 1..groups.len() {
                if let Some(m) = try_merge(&groups[i], &groups[j], cfg) {
                    groups[i] = m;
                    groups.remove(j);
                    continue 'outer;
                }
            }
        }
        break;
    }
    groups.into_iter().map(LineGroup::to_segment).collect()
}

/// Line segments found in a grayscale image.
pub fn detect_segments(img: &GrayImage, cfg: &LineDetectorConfig) -> Result<Vec<Segment>, RefineError> {
    let (w, h) = (img.width() as usize, img.height() as usize);
    if w == 0 || h == 0 {
        return Err(RefineError::EmptyImage);
    }
    let mask = edge_mask(img);
    let raw = probabilistic_hough(&mask, w, h, cfg);
    Ok(merge_parallel(raw, cfg))
}

/// Binary map of detected line segments.
pub fn detect_line_map(img: &GrayImage, cfg: &LineDetectorConfig) -> Result<LineMap, RefineError> {
    let segments = detect_segments(img, cfg)?;
    let mut map = LineMap::empty(img.width() as usize, img.height() as usize);
    for s in &segments {
        map.draw_segment(s);
    }
    Ok(map)
}

#[cfg(test)]
mod tests {
    use super::*;
    use image::Luma;

    fn outline(w: u32, h: u32, x0: u32, y0: u32, x1: u32, y1: u32) -> GrayImage {
        let mut img = GrayImage::from_pixel(w, h, Luma([255]));
        for x in x0..=x1 {
            img.put_pixel(x, y0, Luma([0]));
            img.put_pixel(x, y1, Luma([0]));
        }
        for y in y0..=y1 {
            img.put_pixel(x0, y, Luma([0]));
            img.put_pixel(x1, y, Luma([0]));
        }
        img
    }

    #[test]
    fn uniform_image_has_no_lines() {
        let img = GrayImage::from_pixel(40, 30, Luma([128]));
        let map = detect_line_map(&img, &LineDetectorConfig::default()).unwrap();
        assert_eq!(map.count(), 0);
    }

    #[test]
    fn empty_image() {
        let img = GrayImage::new(0, 0);
        assert_eq!(
            detect_line_map(&img, &LineDetectorConfig::default()),
            Err(RefineError::EmptyImage)
        );
    }

    #[test]
    fn rectangle_outline_perimeter_coverage() {
        for (x0, y0, x1, y1) in [(20, 15, 80, 60), (10, 10, 50, 50), (30, 20, 130, 70)] {
            let img = outline(160, 90, x0, y0, x1, y1);
            let map = detect_line_map(&img, &LineDetectorConfig::default()).unwrap();
            let mut total = 0;
            let mut hit = 0;
            for x in x0..=x1 {
                for y in [y0, y1] {
                    total += 1;
                    hit += map.get(x as usize, y as usize) as usize;
                }
            }
            for y in y0 + 1..y1 {
                for x in [x0, x1] {
                    total += 1;
                    hit += map.get(x as usize, y as usize) as usize;
                }
            }
            let cov = hit as f64 / total as f64;
            assert!(cov >= 0.9, "coverage {cov} for {:?}", (x0, y0, x1, y1));
        }
    }

    #[test]
    fn otsu_splits_bimodal() {
        let mut v = vec![0.0; 100];
        v.extend(vec![10.0; 20]);
        let t = otsu_threshold(&v).unwrap();
        assert!(t > 0.0 && t <= 10.0);
        assert_eq!(otsu_threshold(&[0.0, 0.0]), None);
    }

    #[test]
    fn merges_double_edges_to_centre() {
        let cfg = LineDetectorConfig::default();
        let a = Segment { x0: 0.0, y0: 9.0, x1: 40.0, y1: 9.0 };
        let b = Segment { x0: 1.0, y0: 11.0, x1: 39.0, y1: 11.0 };
        let far = Segment { x0: 0.0, y0: 30.0, x1: 40.0, y1: 30.0 };
        let merged = merge_parallel(vec![a, b, far], &cfg);
        assert_eq!(merged.len(), 2);
        let m = merged[0];
        assert!((m.y0 - 10.0).abs() < 1e-9 && (m.y1 - 10.0).abs() < 1e-9);
        assert!((m.x0 - 0.0).abs() < 1e-9 && (m.x1 - 40.0).abs() < 1e-9);
    }
}
