use alloc::vec::Vec;

use nalgebra::{DMatrix, Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pressure::PressureImage;

/// A point pair `source -> target` (sensor px -> image px).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Correspondence {
    pub source: [f64; 2],
    pub target: [f64; 2],
}

impl Correspondence {
    pub fn new(source: (f64, f64), target: (f64, f64)) -> Self {
        Self { source: [source.0, source.1], target: [target.0, target.1] }
    }
}

/// Invertible 3×3 projective map, scaled so that `m[2][2] = 1` whenever
/// that element is nonzero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[[f64; 3]; 3]", into = "[[f64; 3]; 3]")]
pub struct Homography {
    m: [[f64; 3]; 3],
}

impl From<Homography> for [[f64; 3]; 3] {
    fn from(h: Homography) -> Self {
        h.m
    }
}

impl TryFrom<[[f64; 3]; 3]> for Homography {
    type Error = Error;
    fn try_from(m: [[f64; 3]; 3]) -> Result<Self> {
        Homography::new(m)
    }
}

const MIN_DET: f64 = 1e-12;

impl Homography {
    pub fn new(m: [[f64; 3]; 3]) -> Result<Self> {
        if m.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::invalid("homography has non-finite entries"));
        }
        let mut m = m;
        let s = m[2][2];
        if s != 0.0 {
            for v in m.iter_mut().flatten() {
                *v /= s;
            }
        }
        let h = Self { m };
        if libm::fabs(h.determinant()) <= MIN_DET {
            return Err(Error::SingularConfiguration("homography is not invertible".into()));
        }
        Ok(h)
    }

    pub fn identity() -> Self {
        Self { m: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]] }
    }

    pub fn matrix(&self) -> [[f64; 3]; 3] {
        self.m
    }

    fn to_na(self) -> Matrix3<f64> {
        let m = self.m;
        Matrix3::new(m[0][0], m[0][1], m[0][2], m[1][0], m[1][1], m[1][2], m[2][0], m[2][1], m[2][2])
    }

    fn from_na(n: &Matrix3<f64>) -> Result<Self> {
        Self::new([
            [n[(0, 0)], n[(0, 1)], n[(0, 2)]],
            [n[(1, 0)], n[(1, 1)], n[(1, 2)]],
            [n[(2, 0)], n[(2, 1)], n[(2, 2)]],
        ])
    }

    pub fn determinant(&self) -> f64 {
        self.to_na().determinant()
    }

    pub fn inverse(&self) -> Result<Self> {
        let inv = self
            .to_na()
            .try_inverse()
            .ok_or_else(|| Error::SingularConfiguration("homography is not invertible".into()))?;
        Self::from_na(&inv)
    }

    /// Maps a point; `None` when it lands on the line at infinity.
    pub fn apply(&self, x: f64, y: f64) -> Option<(f64, f64)> {
        let m = &self.m;
        let w = m[2][0] * x + m[2][1] * y + m[2][2];
        if libm::fabs(w) < 1e-15 {
            return None;
        }
        Some(((m[0][0] * x + m[0][1] * y + m[0][2]) / w, (m[1][0] * x + m[1][1] * y + m[1][2]) / w))
    }
}

/// Translation to the centroid and isotropic scaling to mean distance √2.
fn normalization(points: impl Iterator<Item = [f64; 2]> + Clone) -> Result<Matrix3<f64>> {
    let n = points.clone().count() as f64;
    let (sx, sy) = points.clone().fold((0.0, 0.0), |(a, b), p| (a + p[0], b + p[1]));
    let (cx, cy) = (sx / n, sy / n);
    let mean_dist = points.map(|p| libm::hypot(p[0] - cx, p[1] - cy)).sum::<f64>() / n;
    if !(mean_dist > 1e-12) {
        return Err(Error::SingularConfiguration("all points coincide".into()));
    }
    let s = core::f64::consts::SQRT_2 / mean_dist;
    Ok(Matrix3::new(s, 0.0, -s * cx, 0.0, s, -s * cy, 0.0, 0.0, 1.0))
}

fn transform(t: &Matrix3<f64>, p: [f64; 2]) -> (f64, f64) {
    let v = t * Vector3::new(p[0], p[1], 1.0);
    (v[0] / v[2], v[1] / v[2])
}

/// Normalized direct linear transform from at least four correspondences.
///
/// Both point sets are normalized, the stacked `2n×9` system is solved in
/// the least-squares sense through its SVD, and the result is mapped back
/// and scaled so `m[2][2] = 1`. A rank-deficient system (collinear or
/// coincident points) is a singular configuration.
pub fn estimate_homography(pairs: &[Correspondence]) -> Result<Homography> {
    if pairs.len() < 4 {
        return Err(Error::invalid("a homography needs at least 4 correspondences"));
    }
    if pairs.iter().any(|c| c.source.iter().chain(&c.target).any(|v| !v.is_finite())) {
        return Err(Error::invalid("correspondences must be finite"));
    }
    let t_src = normalization(pairs.iter().map(|c| c.source))?;
    let t_dst = normalization(pairs.iter().map(|c| c.target))?;

    // pad to at least 9 rows so the null vector appears in V
    let rows = (2 * pairs.len()).max(9);
    let mut a = DMatrix::<f64>::zeros(rows, 9);
    for (k, c) in pairs.iter().enumerate() {
        let (x, y) = transform(&t_src, c.source);
        let (u, v) = transform(&t_dst, c.target);
        let r = 2 * k;
        a[(r, 0)] = -x;
        a[(r, 1)] = -y;
        a[(r, 2)] = -1.0;
        a[(r, 6)] = u * x;
        a[(r, 7)] = u * y;
        a[(r, 8)] = u;
        a[(r + 1, 3)] = -x;
        a[(r + 1, 4)] = -y;
        a[(r + 1, 5)] = -1.0;
        a[(r + 1, 6)] = v * x;
        a[(r + 1, 7)] = v * y;
        a[(r + 1, 8)] = v;
    }
    let svd = a.svd(false, true);
    let v_t = svd
        .v_t
        .ok_or_else(|| Error::SingularConfiguration("SVD did not converge".into()))?;
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[i].total_cmp(&svd.singular_values[j]));
    let smallest = order[0];
    let second = svd.singular_values[order[1]];
    let largest = svd.singular_values[order[order.len() - 1]];
    if second <= 1e-9 * largest {
        return Err(Error::SingularConfiguration("correspondences do not determine a unique homography".into()));
    }
    let h = v_t.row(smallest);
    let hn = Matrix3::new(h[0], h[1], h[2], h[3], h[4], h[5], h[6], h[7], h[8]);
    let t_dst_inv = t_dst
        .try_inverse()
        .ok_or_else(|| Error::SingularConfiguration("normalization is not invertible".into()))?;
    let den = t_dst_inv * hn * t_src;
    if libm::fabs(den[(2, 2)]) < 1e-12 {
        return Err(Error::SingularConfiguration("homography maps the origin to infinity".into()));
    }
    Homography::from_na(&den)
}

/// Bilinear sample with pixel centers at integer coordinates; zero outside
/// the grid.
fn bilinear(p: &PressureImage, x: f64, y: f64) -> f64 {
    let (w, h) = (p.width(), p.height());
    if !(x >= 0.0 && y >= 0.0 && x <= (w - 1) as f64 && y <= (h - 1) as f64) {
        return 0.0;
    }
    let x0 = libm::floor(x) as usize;
    let y0 = libm::floor(y) as usize;
    let x1 = (x0 + 1).min(w - 1);
    let y1 = (y0 + 1).min(h - 1);
    let fx = x - x0 as f64;
    let fy = y - y0 as f64;
    let top = p.get(x0, y0) * (1.0 - fx) + p.get(x1, y0) * fx;
    let bottom = p.get(x0, y1) * (1.0 - fx) + p.get(x1, y1) * fx;
    top * (1.0 - fy) + bottom * fy
}

/// Resamples a sensor pressure image into image space. `h` maps sensor
/// pixels to image pixels; every output pixel is pulled back through
/// `h⁻¹` and sampled bilinearly.
pub fn project_pressure(sensor: &PressureImage, h: &Homography, out_width: usize, out_height: usize) -> Result<PressureImage> {
    let inv = h.inverse()?;
    if sensor.width() == 0 || sensor.height() == 0 {
        return Ok(PressureImage::zeros(out_width, out_height));
    }
    PressureImage::from_fn(out_width, out_height, |u, v| match inv.apply(u as f64, v as f64) {
        Some((x, y)) => bilinear(sensor, x, y),
        None => 0.0,
    })
}
