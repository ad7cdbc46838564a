use alloc::string::ToString;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::model::{GradientMode, LossConfig, ModelConfig, ModelParams};
use super::{AdamState, Sample};
use crate::error::{Error, Result};
use crate::losses::{ContactLabel, LossBreakdown, LossWeights, Reduction};
use crate::metrics::{contact_accuracy, mean_volumetric_iou, Aggregation, FrameEvaluation};
use crate::pressure::{decode, BinSpec, DecodeMode};
use crate::CONTACT_THRESHOLD_KPA;

/// Computes the combined-loss gradient (domain term reversed at the
/// encoder), applies one Adam update and returns the loss breakdown.
pub fn backward_and_step(
    params: &mut ModelParams,
    adam: &mut AdamState,
    batch: &[&Sample],
    cfg: &LossConfig,
) -> Result<LossBreakdown> {
    let (breakdown, grad) = params.loss_and_grad(batch, cfg, GradientMode::Reversed)?;
    if !breakdown.total.is_finite() || grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::TrainingDiverged { step: adam.step as usize, reason: "non-finite loss or gradient".to_string() });
    }
    adam.update(params.values_mut(), &grad)?;
    Ok(breakdown)
}

impl ModelParams {
    /// See [`backward_and_step`].
    pub fn backward_and_step(&mut self, adam: &mut AdamState, batch: &[&Sample], cfg: &LossConfig) -> Result<LossBreakdown> {
        backward_and_step(self, adam, batch, cfg)
    }
}

/// Largest elementwise relative error between two gradient vectors, with
/// the denominator floored at `1e-6`.
pub fn max_relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| libm::fabs(a - n) / libm::fabs(*a).max(libm::fabs(*n)).max(1e-6))
        .fold(0.0, f64::max)
}

/// Five-point central differences of the combined loss against the
/// analytic gradient (domain term not reversed, so both sides differentiate
/// the same scalar). Returns the max relative error. A step near `1e-3`
/// keeps rounding noise well below the tolerance even for summed losses.
pub fn gradient_check(params: &ModelParams, batch: &[&Sample], cfg: &LossConfig, step: f64) -> Result<f64> {
    let (analytic, numeric) = gradient_check_with(params, batch, cfg, step)?;
    Ok(max_relative_error(&analytic, &numeric))
}

/// Analytic and finite-difference gradients side by side.
pub fn gradient_check_with(
    params: &ModelParams,
    batch: &[&Sample],
    cfg: &LossConfig,
    step: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let (_, analytic) = params.loss_and_grad(batch, cfg, GradientMode::True)?;
    let mut probe = params.clone();
    let mut numeric = Vec::with_capacity(analytic.len());
    for i in 0..params.len() {
        let orig = probe.values()[i];
        let mut at = |k: f64| -> Result<f64> {
            probe.values_mut()[i] = orig + k * step;
            Ok(probe.loss(batch, cfg)?.total)
        };
        let (p1, m1, p2, m2) = (at(1.0)?, at(-1.0)?, at(2.0)?, at(-2.0)?);
        probe.values_mut()[i] = orig;
        numeric.push((8.0 * (p1 - m1) - (p2 - m2)) / (12.0 * step));
    }
    Ok((analytic, numeric))
}

/// Train/validation split of synthetic samples for the toy trainer.
#[derive(Debug, Clone, Default)]
pub struct ToyDataset {
    pub full_train: Vec<Sample>,
    pub weak_train: Vec<Sample>,
    pub full_val: Vec<Sample>,
    pub weak_val: Vec<Sample>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub model: ModelConfig,
    pub bins: BinSpec,
    pub epochs: usize,
    /// Half fully-labeled, half weakly-labeled.
    pub batch_size: usize,
    pub lr: f64,
    /// Fraction of total steps after which the learning rate drops 10×.
    pub lr_decay_at: f64,
    pub weights: LossWeights,
    pub reduction: Reduction,
    pub use_contact_loss: bool,
    pub use_domain_loss: bool,
    pub decode: DecodeMode,
    /// Seed for batch shuffling (model init uses `model.seed`).
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            model: ModelConfig::default(),
            bins: BinSpec::default(),
            epochs: 10,
            batch_size: 8,
            lr: 1e-3,
            lr_decay_at: 1.0 / 3.0,
            weights: LossWeights::default(),
            reduction: Reduction::Mean,
            use_contact_loss: true,
            use_domain_loss: true,
            decode: DecodeMode::Expected,
            seed: 0,
        }
    }
}

impl TrainConfig {
    /// Settings of the desk-scale weak-supervision benchmark: 30 epochs at
    /// lr 0.01 with λ1 = 0.1, λ2 = 0.01 on mean-reduced pressure loss.
    pub fn desk_scale(seed: u64) -> Self {
        Self {
            model: ModelConfig { seed, ..ModelConfig::default() },
            epochs: 30,
            lr: 0.01,
            weights: LossWeights { lambda1: 0.1, lambda2: 0.01 },
            seed,
            ..Self::default()
        }
    }

    pub fn loss_config(&self) -> LossConfig {
        LossConfig {
            weights: LossWeights {
                lambda1: if self.use_contact_loss { self.weights.lambda1 } else { 0.0 },
                lambda2: if self.use_domain_loss { self.weights.lambda2 } else { 0.0 },
            },
            reduction: self.reduction,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    /// Mean over the epoch's steps.
    pub loss: LossBreakdown,
    pub weak_contact_accuracy: Option<f64>,
    pub full_contact_accuracy: Option<f64>,
    pub full_volumetric_iou: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: ModelParams,
    pub adam: AdamState,
    pub history: Vec<EpochMetrics>,
}

/// Decodes the model's pressure estimate for every sample and pairs it with
/// the sample's ground truth.
pub fn evaluate_model(params: &ModelParams, samples: &[Sample], bins: &BinSpec, mode: DecodeMode) -> Result<Vec<FrameEvaluation>> {
    samples
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let out = params.forward(&s.features)?;
            let estimate = decode(&out.pressure_logits.softmax(), bins, mode)?;
            Ok(FrameEvaluation {
                frame_id: i as u64,
                truth_label: s.label,
                truth_pressure: s.pressure.clone(),
                estimate,
                estimated_label: Some(ContactLabel::from_logits(&out.contact_logits)),
            })
        })
        .collect()
}

/// Trains from a fresh initialization. Deterministic given the config.
pub fn train_toy(data: &ToyDataset, cfg: &TrainConfig) -> Result<TrainOutcome> {
    if cfg.batch_size < 2 || !cfg.batch_size.is_multiple_of(2) {
        return Err(Error::invalid("batch size must be even and at least 2"));
    }
    if cfg.epochs == 0 {
        return Err(Error::invalid("epochs must be at least 1"));
    }
    if !(cfg.lr > 0.0 && cfg.lr.is_finite()) {
        return Err(Error::invalid("learning rate must be positive and finite"));
    }
    if data.full_train.is_empty() {
        return Err(Error::invalid("training needs fully-labeled samples"));
    }
    if cfg.model.n_bins != cfg.bins.n_bins() {
        return Err(Error::invalid("model and bin spec disagree on bin count"));
    }
    let mut params = ModelParams::init(&cfg.model)?;
    let mut adam = AdamState::new(params.len(), cfg.lr);
    let loss_cfg = cfg.loss_config();
    let half = cfg.batch_size / 2;
    let steps_per_epoch = data.full_train.len().div_ceil(half);
    let total_steps = steps_per_epoch * cfg.epochs;
    let decay_step = (total_steps as f64 * cfg.lr_decay_at) as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut full_order: Vec<usize> = (0..data.full_train.len()).collect();
    let mut weak_order: Vec<usize> = (0..data.weak_train.len()).collect();
    let mut weak_cursor = 0usize;
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut step = 0usize;

    for epoch in 0..cfg.epochs {
        full_order.shuffle(&mut rng);
        let mut sum = LossBreakdown { l_p: 0.0, l_w: 0.0, l_d: 0.0, total: 0.0, lambda1: loss_cfg.weights.lambda1, lambda2: loss_cfg.weights.lambda2 };
        for chunk in full_order.chunks(half) {
            adam.lr = if step < decay_step { cfg.lr } else { cfg.lr * 0.1 };
            let mut batch: Vec<&Sample> = chunk.iter().map(|&i| &data.full_train[i]).collect();
            if !weak_order.is_empty() {
                for _ in 0..half {
                    if weak_cursor == 0 {
                        weak_order.shuffle(&mut rng);
                    }
                    batch.push(&data.weak_train[weak_order[weak_cursor]]);
                    weak_cursor = (weak_cursor + 1) % weak_order.len();
                }
            }
            let b = backward_and_step(&mut params, &mut adam, &batch, &loss_cfg).map_err(|e| match e {
                Error::TrainingDiverged { reason, .. } => Error::TrainingDiverged { step, reason },
                other => other,
            })?;
            sum.l_p += b.l_p;
            sum.l_w += b.l_w;
            sum.l_d += b.l_d;
            sum.total += b.total;
            step += 1;
        }
        let n = steps_per_epoch as f64;
        sum.l_p /= n;
        sum.l_w /= n;
        sum.l_d /= n;
        sum.total /= n;

        let weak_contact_accuracy = if data.weak_val.is_empty() {
            None
        } else {
            Some(contact_accuracy(&evaluate_model(&params, &data.weak_val, &cfg.bins, cfg.decode)?, CONTACT_THRESHOLD_KPA)?)
        };
        let (full_contact_accuracy, full_volumetric_iou) = if data.full_val.is_empty() {
            (None, None)
        } else {
            let frames = evaluate_model(&params, &data.full_val, &cfg.bins, cfg.decode)?;
            (
                Some(contact_accuracy(&frames, CONTACT_THRESHOLD_KPA)?),
                mean_volumetric_iou(&frames, Aggregation::PerFrame)?,
            )
        };
        history.push(EpochMetrics { epoch, loss: sum, weak_contact_accuracy, full_contact_accuracy, full_volumetric_iou });
    }
    Ok(TrainOutcome { params, adam, history })
}
