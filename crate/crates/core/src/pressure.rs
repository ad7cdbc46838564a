//! Pressure images, binary contact images and the logarithmic bin
//! representation shared by the pressure loss and decoding.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense row-major grid of non-negative pressures in kPa.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGrid<f64>")]
pub struct PressureImage {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

#[derive(Deserialize)]
struct RawGrid<T> {
    width: usize,
    height: usize,
    data: Vec<T>,
}

impl TryFrom<RawGrid<f64>> for PressureImage {
    type Error = Error;
    fn try_from(raw: RawGrid<f64>) -> Result<Self> {
        PressureImage::new(raw.width, raw.height, raw.data)
    }
}

impl PressureImage {
    /// Validates the grid. Negative zeros are stored as `0.0`.
    pub fn new(width: usize, height: usize, mut data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::invalid(alloc::format!(
                "pressure data has {} values, expected {}x{}",
                data.len(),
                width,
                height
            )));
        }
        if let Some(bad) = data.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::invalid(alloc::format!("pressure value {bad} is negative or non-finite")));
        }
        data.iter_mut().for_each(|v| *v += 0.0);
        Ok(Self { width, height, data })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self { width, height, data: vec![0.0; width * height] }
    }

    /// Builds an image by evaluating `f(x, y)` at every pixel.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self::new(width, height, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(0.0, f64::max)
    }

    /// Sum over all pixels (kPa·px²).
    pub fn total(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn same_shape(&self, other: &PressureImage) -> bool {
        self.width == other.width && self.height == other.height
    }

    /// Multiplies every pixel by a non-negative factor.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.width, self.height, self.data.iter().map(|v| v * factor).collect())
    }
}

/// Binary contact grid obtained by thresholding a pressure image.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContactImage {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl ContactImage {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::invalid("contact data length does not match dimensions"));
        }
        if data.iter().any(|&v| v > 1) {
            return Err(Error::invalid("contact values must be 0 or 1"));
        }
        Ok(Self { width, height, data })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&v| v == 1).count()
    }

    pub fn any(&self) -> bool {
        self.data.contains(&1)
    }
}

/// Marks every pixel whose pressure is at least `threshold` kPa.
pub fn contact_image(p: &PressureImage, threshold: f64) -> Result<ContactImage> {
    if !(threshold > 0.0) {
        return Err(Error::invalid("contact threshold must be positive"));
    }
    Ok(ContactImage {
        width: p.width,
        height: p.height,
        data: p.data.iter().map(|&v| u8::from(v >= threshold)).collect(),
    })
}

/// Logarithmic quantization of pressure into `n_bins` classes.
///
/// Bin 0 covers `[0, p_low)`. The remaining `n_bins - 1` bins are the
/// half-open intervals between consecutive `edges`, which run from `p_low`
/// to `p_high` in equal log steps; anything at or above `p_high` lands in
/// the top bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinSpec {
    n_bins: usize,
    p_low: f64,
    p_high: f64,
    edges: Vec<f64>,
}

impl Default for BinSpec {
    fn default() -> Self {
        BinSpec::new(9, 1.0, 30.0).expect("default bin spec is valid")
    }
}

impl BinSpec {
    pub fn new(n_bins: usize, p_low: f64, p_high: f64) -> Result<Self> {
        if n_bins < 2 {
            return Err(Error::invalid("a bin spec needs at least two bins"));
        }
        if !(p_low > 0.0 && p_high > p_low && p_high.is_finite()) {
            return Err(Error::invalid("bin range must satisfy 0 < p_low < p_high"));
        }
        let ratio = p_high / p_low;
        let steps = (n_bins - 1) as f64;
        let mut edges: Vec<f64> = (0..n_bins)
            .map(|j| p_low * libm::pow(ratio, j as f64 / steps))
            .collect();
        edges[0] = p_low;
        edges[n_bins - 1] = p_high;
        if edges.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("bin edges are not strictly increasing"));
        }
        Ok(Self { n_bins, p_low, p_high, edges })
    }

    pub fn n_bins(&self) -> usize {
        self.n_bins
    }

    pub fn p_low(&self) -> f64 {
        self.p_low
    }

    pub fn p_high(&self) -> f64 {
        self.p_high
    }

    /// The `n_bins` nonzero-bin edges, `edges[0] = p_low`, `edges[n_bins-1] = p_high`.
    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    /// Bin index of a single pressure value.
    pub fn bin_of(&self, p: f64) -> u8 {
        if !(p >= self.p_low) {
            return 0;
        }
        // number of edges <= p, at least 1 here
        let below = self.edges.partition_point(|&e| e <= p);
        below.min(self.n_bins - 1) as u8
    }

    /// Representative pressure of a bin: 0 for the zero bin, otherwise the
    /// geometric mean of the bin's edges.
    pub fn representative(&self, bin: usize) -> f64 {
        if bin == 0 {
            0.0
        } else {
            libm::sqrt(self.edges[bin - 1] * self.edges[bin])
        }
    }

    pub fn representatives(&self) -> Vec<f64> {
        (0..self.n_bins).map(|b| self.representative(b)).collect()
    }
}

/// Row-major grid of bin indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinIndexImage {
    width: usize,
    height: usize,
    n_bins: usize,
    data: Vec<u8>,
}

impl BinIndexImage {
    pub fn new(width: usize, height: usize, n_bins: usize, data: Vec<u8>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::invalid("bin index data length does not match dimensions"));
        }
        if data.iter().any(|&b| b as usize >= n_bins) {
            return Err(Error::invalid("bin index out of range"));
        }
        Ok(Self { width, height, n_bins, data })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn n_bins(&self) -> usize {
        self.n_bins
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }
}

pub fn quantize(p: &PressureImage, spec: &BinSpec) -> BinIndexImage {
    BinIndexImage {
        width: p.width,
        height: p.height,
        n_bins: spec.n_bins,
        data: p.data.iter().map(|&v| spec.bin_of(v)).collect(),
    }
}

/// Per-pixel vectors over bins, stored pixel-major: `data[(y*w + x)*n + b]`.
/// Holds logits, probabilities or their gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct BinMap {
    width: usize,
    height: usize,
    n_bins: usize,
    data: Vec<f64>,
}

impl BinMap {
    pub fn new(width: usize, height: usize, n_bins: usize, data: Vec<f64>) -> Result<Self> {
        if n_bins == 0 || data.len() != width * height * n_bins {
            return Err(Error::invalid("bin map data length does not match dimensions"));
        }
        Ok(Self { width, height, n_bins, data })
    }

    pub fn zeros(width: usize, height: usize, n_bins: usize) -> Self {
        Self { width, height, n_bins, data: vec![0.0; width * height * n_bins] }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn n_bins(&self) -> usize {
        self.n_bins
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn pixel(&self, x: usize, y: usize) -> &[f64] {
        let start = (y * self.width + x) * self.n_bins;
        &self.data[start..start + self.n_bins]
    }

    pub fn pixels(&self) -> core::slice::ChunksExact<'_, f64> {
        self.data.chunks_exact(self.n_bins)
    }

    /// Per-pixel softmax.
    pub fn softmax(&self) -> BinMap {
        let mut out = self.clone();
        for px in out.data.chunks_exact_mut(self.n_bins) {
            softmax_in_place(px);
        }
        out
    }
}

pub(crate) fn softmax_in_place(v: &mut [f64]) {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for x in v.iter_mut() {
        *x = libm::exp(*x - max);
        sum += *x;
    }
    for x in v.iter_mut() {
        *x /= sum;
    }
}

/// How per-pixel bin probabilities are turned back into kPa.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecodeMode {
    #[default]
    Expected,
    Argmax,
}

fn check_probabilities(probs: &BinMap, spec: &BinSpec) -> Result<()> {
    if probs.n_bins != spec.n_bins {
        return Err(Error::invalid("probability map and bin spec disagree on bin count"));
    }
    for px in probs.pixels() {
        let sum: f64 = px.iter().sum();
        if px.iter().any(|p| !(*p >= 0.0)) || libm::fabs(sum - 1.0) > 1e-6 {
            return Err(Error::invalid("per-pixel probabilities must be non-negative and sum to 1"));
        }
    }
    Ok(())
}

/// Expected pressure under each pixel's bin distribution.
pub fn decode_expected(probs: &BinMap, spec: &BinSpec) -> Result<PressureImage> {
    check_probabilities(probs, spec)?;
    let reps = spec.representatives();
    let data = probs
        .pixels()
        .map(|px| px.iter().zip(&reps).map(|(p, r)| p * r).sum::<f64>())
        .collect();
    PressureImage::new(probs.width, probs.height, data)
}

/// Representative pressure of each pixel's most probable bin (lowest index on ties).
pub fn decode_argmax(probs: &BinMap, spec: &BinSpec) -> Result<PressureImage> {
    check_probabilities(probs, spec)?;
    let data = probs
        .pixels()
        .map(|px| {
            let mut best = 0;
            for (b, &p) in px.iter().enumerate() {
                if p > px[best] {
                    best = b;
                }
            }
            spec.representative(best)
        })
        .collect();
    PressureImage::new(probs.width, probs.height, data)
}

pub fn decode(probs: &BinMap, spec: &BinSpec, mode: DecodeMode) -> Result<PressureImage> {
    match mode {
        DecodeMode::Expected => decode_expected(probs, spec),
        DecodeMode::Argmax => decode_argmax(probs, spec),
    }
}
