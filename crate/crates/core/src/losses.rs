//! Training losses with hand-derived gradients: the structure-aware
//! cross-entropy over pressure bins, the masked contact-label BCE, and the
//! adversarial domain loss together with its gradient-reversal contract.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pressure::{BinIndexImage, BinMap};

/// Probabilities are clamped below at this value inside every log.
pub const PROB_EPS: f64 = 1e-12;

fn ln_eps() -> f64 {
    libm::log(PROB_EPS)
}

/// Prompted force level, the sixth element of a contact label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Force {
    #[default]
    Unspecified,
    Low,
    High,
}

impl Force {
    pub fn as_i8(self) -> i8 {
        match self {
            Force::Unspecified => -1,
            Force::Low => 0,
            Force::High => 1,
        }
    }

    pub fn from_i8(v: i8) -> Option<Self> {
        match v {
            -1 => Some(Force::Unspecified),
            0 => Some(Force::Low),
            1 => Some(Force::High),
            _ => None,
        }
    }
}

/// Weak label: five fingertip contact flags (thumb, index, middle, ring,
/// pinky) and a force level. Serialized as the 6-element vector
/// `[thumb, index, middle, ring, pinky, force]` with force in {-1, 0, 1}.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(into = "[i8; 6]", try_from = "[i8; 6]")]
pub struct ContactLabel {
    pub fingers: [bool; 5],
    pub force: Force,
}

impl ContactLabel {
    pub const NO_CONTACT: ContactLabel = ContactLabel { fingers: [false; 5], force: Force::Unspecified };

    pub fn new(fingers: [bool; 5], force: Force) -> Self {
        Self { fingers, force }
    }

    pub fn is_contact(&self) -> bool {
        self.fingers.iter().any(|&f| f)
    }

    pub fn to_vector(self) -> [i8; 6] {
        let mut v = [0i8; 6];
        for (slot, &f) in v.iter_mut().zip(&self.fingers) {
            *slot = i8::from(f);
        }
        v[5] = self.force.as_i8();
        v
    }

    /// Thresholds six contact-head logits into a label (force is never
    /// predicted as unspecified).
    pub fn from_logits(logits: &[f64; 6]) -> Self {
        let mut fingers = [false; 5];
        for (f, &z) in fingers.iter_mut().zip(logits.iter()) {
            *f = z > 0.0;
        }
        let force = if logits[5] > 0.0 { Force::High } else { Force::Low };
        Self { fingers, force }
    }
}

impl From<ContactLabel> for [i8; 6] {
    fn from(l: ContactLabel) -> Self {
        l.to_vector()
    }
}

impl TryFrom<[i8; 6]> for ContactLabel {
    type Error = Error;
    fn try_from(v: [i8; 6]) -> Result<Self> {
        let mut fingers = [false; 5];
        for (f, &x) in fingers.iter_mut().zip(&v[..5]) {
            *f = match x {
                0 => false,
                1 => true,
                _ => return Err(Error::invalid("finger flags must be 0 or 1")),
            };
        }
        let force = Force::from_i8(v[5]).ok_or_else(|| Error::invalid("force must be -1, 0 or 1"))?;
        Ok(Self { fingers, force })
    }
}

/// Pixel reduction for the structure-aware cross-entropy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reduction {
    #[default]
    Sum,
    Mean,
}

/// Cross-entropy over ordered bins where bin `b` is weighted by
/// `exp(-|b - k|)` for target bin `k`, so near misses cost less.
///
/// Returns the loss and its exact gradient with respect to `logits`.
pub fn structure_aware_ce(logits: &BinMap, target: &BinIndexImage, reduction: Reduction) -> Result<(f64, BinMap)> {
    if logits.width() != target.width()
        || logits.height() != target.height()
        || logits.n_bins() != target.n_bins()
    {
        return Err(Error::invalid("logits and target shapes differ"));
    }
    let n = logits.n_bins();
    let weights: Vec<f64> = (0..2 * n).map(|d| libm::exp(-(d as f64))).collect();
    let mut grad = BinMap::zeros(logits.width(), logits.height(), n);
    let mut loss = 0.0;
    let mut probs = alloc::vec![0.0; n];
    for ((z, g), &k) in logits
        .pixels()
        .zip(grad.data_mut().chunks_exact_mut(n))
        .zip(target.data())
    {
        let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for (p, &zb) in probs.iter_mut().zip(z) {
            *p = libm::exp(zb - max);
            sum += *p;
        }
        let log_sum = libm::log(sum) + max;
        for p in probs.iter_mut() {
            *p /= sum;
        }
        let k = k as usize;
        let mut active_weight = 0.0;
        for b in 0..n {
            let w = weights[b.abs_diff(k)];
            let log_p = z[b] - log_sum;
            if log_p >= ln_eps() {
                loss -= w * log_p;
                active_weight += w;
                g[b] -= w;
            } else {
                loss -= w * ln_eps();
            }
        }
        for (gb, p) in g.iter_mut().zip(&probs) {
            *gb += active_weight * p;
        }
    }
    if reduction == Reduction::Mean {
        let count = (logits.width() * logits.height()).max(1) as f64;
        loss /= count;
        for g in grad.data_mut() {
            *g /= count;
        }
    }
    Ok((loss, grad))
}

#[inline]
pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + libm::exp(-z))
    } else {
        let e = libm::exp(z);
        e / (1.0 + e)
    }
}

#[inline]
fn softplus(x: f64) -> f64 {
    x.max(0.0) + libm::log1p(libm::exp(-libm::fabs(x)))
}

/// Binary cross-entropy on a logit with the probability clamped at
/// [`PROB_EPS`]. Returns `(loss, d loss / d logit)`.
pub fn bce_with_logit(z: f64, target_positive: bool) -> (f64, f64) {
    if target_positive {
        let log_p = -softplus(-z);
        if log_p >= ln_eps() {
            (-log_p, -sigmoid(-z))
        } else {
            (-ln_eps(), 0.0)
        }
    } else {
        let log_q = -softplus(z);
        if log_q >= ln_eps() {
            (-log_q, sigmoid(z))
        } else {
            (-ln_eps(), 0.0)
        }
    }
}

/// Sigmoid + BCE over the six contact-label elements, averaged over the
/// unmasked ones. The force element is masked out (zero loss, zero
/// gradient) when the label's force is unspecified.
pub fn contact_label_loss(logits: &[f64; 6], label: &ContactLabel) -> (f64, [f64; 6]) {
    let mut grad = [0.0; 6];
    let mut loss = 0.0;
    let mut active = 0usize;
    for i in 0..5 {
        let (l, g) = bce_with_logit(logits[i], label.fingers[i]);
        loss += l;
        grad[i] = g;
        active += 1;
    }
    let force_target = match label.force {
        Force::Unspecified => None,
        Force::Low => Some(false),
        Force::High => Some(true),
    };
    if let Some(t) = force_target {
        let (l, g) = bce_with_logit(logits[5], t);
        loss += l;
        grad[5] = g;
        active += 1;
    }
    let scale = 1.0 / active as f64;
    for g in grad.iter_mut() {
        *g *= scale;
    }
    (loss * scale, grad)
}

/// Adversarial domain loss `-log D(F_full) - log(1 - D(F_weak))` evaluated on
/// discriminator probabilities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DomainLoss {
    pub loss: f64,
    /// d loss / d D(F_full), followed by the discriminator.
    pub grad_full: f64,
    /// d loss / d D(F_weak), followed by the discriminator.
    pub grad_weak: f64,
}

impl DomainLoss {
    /// Gradient the encoder receives: the discriminator-side gradient
    /// passed through [`GradientReversal`].
    pub fn encoder_side(&self) -> [f64; 2] {
        let mut out = [0.0; 2];
        out.copy_from_slice(&GradientReversal.backward(&[self.grad_full, self.grad_weak]));
        out
    }
}

pub fn domain_loss(d_full: f64, d_weak: f64) -> DomainLoss {
    let (mut loss, mut grad_full, mut grad_weak) = (0.0, 0.0, 0.0);
    if d_full >= PROB_EPS {
        loss -= libm::log(d_full);
        grad_full = -1.0 / d_full;
    } else {
        loss -= ln_eps();
    }
    let q = 1.0 - d_weak;
    if q >= PROB_EPS {
        loss -= libm::log(q);
        grad_weak = 1.0 / q;
    } else {
        loss -= ln_eps();
    }
    DomainLoss { loss, grad_full, grad_weak }
}

/// Identity on the forward pass; negates gradients on the backward pass.
/// The reversal scale is fixed at 1.
#[derive(Debug, Clone, Copy, Default)]
pub struct GradientReversal;

impl GradientReversal {
    pub fn forward<'a>(&self, x: &'a [f64]) -> &'a [f64] {
        x
    }

    pub fn backward(&self, grad: &[f64]) -> Vec<f64> {
        grad.iter().map(|g| -g).collect()
    }

    pub fn backward_in_place(&self, grad: &mut [f64]) {
        for g in grad {
            *g = -*g;
        }
    }
}

/// Weights of the contact-label and domain terms in the combined loss.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub lambda1: f64,
    pub lambda2: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self { lambda1: 0.01, lambda2: 0.001 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub l_p: f64,
    pub l_w: f64,
    pub l_d: f64,
    pub total: f64,
    pub lambda1: f64,
    pub lambda2: f64,
}

/// `L = L_p + λ1·L_w + λ2·L_d`. Pass `None` for `l_p` on weakly-labeled
/// batches, where the pressure term does not exist.
pub fn combined_loss(l_p: Option<f64>, l_w: f64, l_d: f64, weights: LossWeights) -> LossBreakdown {
    let l_p = l_p.unwrap_or(0.0);
    LossBreakdown {
        l_p,
        l_w,
        l_d,
        total: l_p + weights.lambda1 * l_w + weights.lambda2 * l_d,
        lambda1: weights.lambda1,
        lambda2: weights.lambda2,
    }
}
