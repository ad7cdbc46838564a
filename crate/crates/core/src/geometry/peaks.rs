use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pressure::PressureImage;

/// A detected pressure peak.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TouchPoint {
    /// Sub-pixel position, px (x = column, y = row).
    pub x: f64,
    pub y: f64,
    /// Integer pixel of the peak.
    pub col: usize,
    pub row: usize,
    pub peak_pressure: f64,
    /// Summed pressure of the above-threshold blob containing the peak, kPa·px².
    pub blob_force_proxy: f64,
}

/// Local maxima at or above `threshold`, greedily suppressed.
///
/// A pixel qualifies when it is `>=` all of its 8 neighbours. Candidates are
/// visited by descending pressure, ties by ascending `(row, col)`, and kept
/// only if every previously kept peak is at least `min_distance` away.
/// Positions are refined by the centre of mass of the 3×3 window.
pub fn find_peaks(p: &PressureImage, threshold: f64, min_distance: f64) -> Result<Vec<TouchPoint>> {
    if !(threshold > 0.0) {
        return Err(Error::invalid("peak threshold must be positive"));
    }
    if !(min_distance >= 1.0) {
        return Err(Error::invalid("minimum peak distance must be at least 1 px"));
    }
    let (w, h) = (p.width(), p.height());
    let mut candidates = Vec::new();
    for row in 0..h {
        for col in 0..w {
            let v = p.get(col, row);
            if v < threshold {
                continue;
            }
            let is_max = neighbours(col, row, w, h).all(|(nx, ny)| p.get(nx, ny) <= v);
            if is_max {
                candidates.push((row, col, v));
            }
        }
    }
    candidates.sort_by(|a, b| b.2.total_cmp(&a.2).then(a.0.cmp(&b.0)).then(a.1.cmp(&b.1)));

    let mut kept: Vec<(usize, usize, f64)> = Vec::new();
    let min_sq = min_distance * min_distance;
    for c in candidates {
        let far = kept.iter().all(|k| {
            let dr = k.0 as f64 - c.0 as f64;
            let dc = k.1 as f64 - c.1 as f64;
            dr * dr + dc * dc >= min_sq
        });
        if far {
            kept.push(c);
        }
    }
    if kept.is_empty() {
        return Ok(Vec::new());
    }

    let blobs = BlobLabels::new(p, threshold);
    Ok(kept
        .into_iter()
        .map(|(row, col, v)| {
            let (x, y) = centre_of_mass(p, col, row);
            TouchPoint { x, y, col, row, peak_pressure: v, blob_force_proxy: blobs.sum_at(col, row) }
        })
        .collect())
}

fn neighbours(col: usize, row: usize, w: usize, h: usize) -> impl Iterator<Item = (usize, usize)> {
    (-1i64..=1)
        .flat_map(|dy| (-1i64..=1).map(move |dx| (dx, dy)))
        .filter(|&(dx, dy)| dx != 0 || dy != 0)
        .filter_map(move |(dx, dy)| {
            let nx = col as i64 + dx;
            let ny = row as i64 + dy;
            (nx >= 0 && ny >= 0 && (nx as usize) < w && (ny as usize) < h).then_some((nx as usize, ny as usize))
        })
}

fn centre_of_mass(p: &PressureImage, col: usize, row: usize) -> (f64, f64) {
    let (mut sx, mut sy, mut total) = (0.0, 0.0, p.get(col, row));
    sx += col as f64 * total;
    sy += row as f64 * total;
    for (nx, ny) in neighbours(col, row, p.width(), p.height()) {
        let v = p.get(nx, ny);
        sx += nx as f64 * v;
        sy += ny as f64 * v;
        total += v;
    }
    (sx / total, sy / total)
}

/// 8-connected components of the above-threshold mask and their sums.
struct BlobLabels {
    width: usize,
    labels: Vec<u32>,
    sums: Vec<f64>,
}

impl BlobLabels {
    fn new(p: &PressureImage, threshold: f64) -> Self {
        let (w, h) = (p.width(), p.height());
        let mut labels = vec![u32::MAX; w * h];
        let mut sums = Vec::new();
        let mut stack = Vec::new();
        for start in 0..w * h {
            if labels[start] != u32::MAX || p.data()[start] < threshold {
                continue;
            }
            let id = sums.len() as u32;
            let mut sum = 0.0;
            labels[start] = id;
            stack.push(start);
            while let Some(i) = stack.pop() {
                sum += p.data()[i];
                for (nx, ny) in neighbours(i % w, i / w, w, h) {
                    let j = ny * w + nx;
                    if labels[j] == u32::MAX && p.data()[j] >= threshold {
                        labels[j] = id;
                        stack.push(j);
                    }
                }
            }
            sums.push(sum);
        }
        Self { width: w, labels, sums }
    }

    fn sum_at(&self, col: usize, row: usize) -> f64 {
        self.sums[self.labels[row * self.width + col] as usize]
    }
}
