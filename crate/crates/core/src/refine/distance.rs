use super::{LineMap, RefineError};

/// Normalized distance-to-nearest-line map with values in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct DistanceMap {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl DistanceMap {
    /// Wraps an arbitrary field; values must lie in `[0, 1]`.
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self, RefineError> {
        if values.len() != width * height || width == 0 || height == 0 {
            return Err(RefineError::InvalidDistanceMap(format!(
                "{} values for {width}x{height}",
                values.len()
            )));
        }
        if values.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(RefineError::InvalidDistanceMap("values outside [0, 1]".into()));
        }
        Ok(Self { width, height, values })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }

    /// `x` and `y` must lie within `[0, width-1] × [0, height-1]`.
    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= 0.0 && y >= 0.0 && x <= (self.width - 1) as f64 && y <= (self.height - 1) as f64
    }

    /// Bilinear interpolation; the caller guarantees `contains(x, y)`.
    pub fn sample(&self, x: f64, y: f64) -> f64 {
        let x0 = (x.floor() as usize).min(self.width - 1);
        let y0 = (y.floor() as usize).min(self.height - 1);
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let (fx, fy) = (x - x0 as f64, y - y0 as f64);
        let top = self.get(x0, y0) * (1.0 - fx) + self.get(x1, y0) * fx;
        let bottom = self.get(x0, y1) * (1.0 - fx) + self.get(x1, y1) * fx;
        top * (1.0 - fy) + bottom * fy
    }

    /// Same map with every value multiplied by `c` (`0 <= c <= 1`).
    pub fn scaled(&self, c: f64) -> Result<Self, RefineError> {
        Self::new(self.width, self.height, self.values.iter().map(|v| v * c).collect())
    }
}

// Finite stand-in for infinity; keeps the parabola intersections free of NaN.
const FAR: f64 = 1e20;

/// One-dimensional squared distance transform of a sampled function
/// (lower envelope of parabolas rooted at each sample).
fn dt1d(f: &[f64], out: &mut [f64], v: &mut [usize], z: &mut [f64]) {
    let n = f.len();
    let intersect = |q: usize, p: usize| -> f64 {
        let (qf, pf) = (q as f64, p as f64);
        ((f[q] + qf * qf) - (f[p] + pf * pf)) / (2.0 * qf - 2.0 * pf)
    };
    let mut k = 0usize;
    v[0] = 0;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for q in 1..n {
        let mut s = intersect(q, v[k]);
        while s <= z[k] {
            k -= 1;
            s = intersect(q, v[k]);
        }
        k += 1;
        v[k] = q;
        z[k] = s;
        z[k + 1] = f64::INFINITY;
    }
    k = 0;
    for (q, o) in out.iter_mut().enumerate().take(n) {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let d = q as f64 - v[k] as f64;
        *o = d * d + f[v[k]];
    }
}

/// Exact Euclidean distance (in pixels) from every pixel to the nearest line
/// pixel, row-major. Pixels are `f64::INFINITY` when the map has no lines.
pub fn euclidean_distance_transform(lines: &LineMap) -> Vec<f64> {
    let (w, h) = (lines.width(), lines.height());
    if lines.count() == 0 {
        return vec![f64::INFINITY; w * h];
    }
    let mut grid: Vec<f64> =
        lines.values().iter().map(|&v| if v == 1 { 0.0 } else { FAR }).collect();
    let n = w.max(h);
    let (mut f, mut out) = (vec![0.0; n], vec![0.0; n]);
    let (mut v, mut z) = (vec![0usize; n], vec![0.0; n + 1]);

    for x in 0..w {
        for y in 0..h {
            f[y] = grid[y * w + x];
        }
        dt1d(&f[..h], &mut out[..h], &mut v, &mut z);
        for y in 0..h {
            grid[y * w + x] = out[y];
        }
    }
    for y in 0..h {
        f[..w].copy_from_slice(&grid[y * w..(y + 1) * w]);
        dt1d(&f[..w], &mut out[..w], &mut v, &mut z);
        grid[y * w..(y + 1) * w].copy_from_slice(&out[..w]);
    }
    grid.iter().map(|d2| d2.sqrt()).collect()
}

/// Distance transform divided by its maximum.
pub fn distance_map(lines: &LineMap) -> Result<DistanceMap, RefineError> {
    if lines.width() == 0 || lines.height() == 0 {
        return Err(RefineError::EmptyImage);
    }
    if lines.count() == 0 {
        return Err(RefineError::NoLinePixels);
    }
    let raw = euclidean_distance_transform(lines);
    let max = raw.iter().copied().fold(0.0, f64::max);
    let values = if max > 0.0 { raw.iter().map(|d| d / max).collect() } else { raw };
    DistanceMap::new(lines.width(), lines.height(), values)
}
