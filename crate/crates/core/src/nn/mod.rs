//! Desk-scale differentiable model: a two-layer strided encoder, a per-pixel
//! pressure head on the upsampled bottleneck, and two heads on the pooled
//! bottleneck (contact label, domain discriminator), trained with Adam.

mod adam;
mod model;
mod train;

pub use adam::AdamState;
pub use model::{
    DomainFeatureGrads, ForwardOutput, GradientMode, LossConfig, ModelConfig, ModelParams, ParamSlot,
};
pub use train::{
    backward_and_step,
    evaluate_model, gradient_check, gradient_check_with, max_relative_error, train_toy, EpochMetrics,
    ToyDataset, TrainConfig, TrainOutcome,
};

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::losses::ContactLabel;
use crate::pressure::{BinIndexImage, PressureImage};

/// Multi-channel input grid, row-major with channels innermost:
/// `data[(y*w + x)*channels + c]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMap {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f64>,
}

impl FeatureMap {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height * channels {
            return Err(Error::invalid("feature map data length does not match dimensions"));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("feature map contains non-finite values"));
        }
        Ok(Self { width, height, channels, data })
    }

    pub fn zeros(width: usize, height: usize, channels: usize) -> Self {
        Self { width, height, channels, data: vec![0.0; width * height * channels] }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize, c: usize) -> f64 {
        self.data[(y * self.width + x) * self.channels + c]
    }
}

/// Which label the sample carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    Full,
    Weak,
}

/// One training/evaluation example for the model.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub features: FeatureMap,
    pub label: ContactLabel,
    /// Ground-truth pressure, present only for fully-labeled samples.
    pub pressure: Option<PressureImage>,
    /// Quantized `pressure`, cached for the loss.
    pub target: Option<BinIndexImage>,
}

impl Sample {
    pub fn domain(&self) -> Domain {
        if self.pressure.is_some() {
            Domain::Full
        } else {
            Domain::Weak
        }
    }
}
