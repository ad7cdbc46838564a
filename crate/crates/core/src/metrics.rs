//! Contact and pressure evaluation metrics, contact-label accuracy, and
//! typing scores.
//!
//! IoU-family metrics return `None` when both images are empty; such frames
//! are left out of averages instead of counting as perfect. `Net WPM` is
//! taken literally and goes negative when errors exceed `c/5`.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::losses::{ContactLabel, Force};
use crate::pressure::{contact_image, ContactImage, PressureImage};

/// One frame's ground truth and estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameEvaluation {
    pub frame_id: u64,
    pub truth_label: ContactLabel,
    /// Present only for fully-labeled frames.
    pub truth_pressure: Option<PressureImage>,
    pub estimate: PressureImage,
    pub estimated_label: Option<ContactLabel>,
}

/// How IoU values are combined across frames.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    /// Mean of per-frame IoU over frames where it is defined.
    #[default]
    PerFrame,
    /// Intersection and union pooled over all frames before dividing.
    Global,
}

/// Fraction of frames where "any pixel ≥ threshold" in the estimate agrees
/// with "any finger in contact" in the label.
pub fn contact_accuracy(frames: &[FrameEvaluation], threshold: f64) -> Result<f64> {
    if frames.is_empty() {
        return Err(Error::invalid("contact accuracy needs at least one frame"));
    }
    if !(threshold > 0.0) {
        return Err(Error::invalid("contact threshold must be positive"));
    }
    let agree = frames
        .iter()
        .filter(|f| f.estimate.data().iter().any(|&p| p >= threshold) == f.truth_label.is_contact())
        .count();
    Ok(agree as f64 / frames.len() as f64)
}

fn check_dims(a: (usize, usize), b: (usize, usize)) -> Result<()> {
    if a != b {
        return Err(Error::invalid(alloc::format!("image dimensions differ: {a:?} vs {b:?}")));
    }
    Ok(())
}

fn contact_counts(gt: &ContactImage, est: &ContactImage) -> Result<(usize, usize)> {
    check_dims((gt.width(), gt.height()), (est.width(), est.height()))?;
    let mut inter = 0;
    let mut union = 0;
    for (&a, &b) in gt.data().iter().zip(est.data()) {
        inter += usize::from(a & b);
        union += usize::from(a | b);
    }
    Ok((inter, union))
}

pub fn contact_iou(gt: &ContactImage, est: &ContactImage) -> Result<Option<f64>> {
    let (inter, union) = contact_counts(gt, est)?;
    Ok((union > 0).then(|| inter as f64 / union as f64))
}

fn volume_sums(gt: &PressureImage, est: &PressureImage) -> Result<(f64, f64)> {
    check_dims((gt.width(), gt.height()), (est.width(), est.height()))?;
    let mut inter = 0.0;
    let mut union = 0.0;
    for (&a, &b) in gt.data().iter().zip(est.data()) {
        inter += a.min(b);
        union += a.max(b);
    }
    Ok((inter, union))
}

/// `Σ min(gt, est) / Σ max(gt, est)`, treating pressure as volume height.
pub fn volumetric_iou(gt: &PressureImage, est: &PressureImage) -> Result<Option<f64>> {
    let (inter, union) = volume_sums(gt, est)?;
    Ok((union > 0.0).then(|| inter / union))
}

fn full_frames(frames: &[FrameEvaluation]) -> impl Iterator<Item = (&PressureImage, &PressureImage)> {
    frames.iter().filter_map(|f| f.truth_pressure.as_ref().map(|gt| (gt, &f.estimate)))
}

/// Contact IoU over the fully-labeled frames; `None` if undefined everywhere.
pub fn mean_contact_iou(frames: &[FrameEvaluation], threshold: f64, aggregation: Aggregation) -> Result<Option<f64>> {
    let mut sum = 0.0;
    let mut defined = 0usize;
    let (mut inter, mut union) = (0usize, 0usize);
    for (gt, est) in full_frames(frames) {
        let (i, u) = contact_counts(&contact_image(gt, threshold)?, &contact_image(est, threshold)?)?;
        inter += i;
        union += u;
        if u > 0 {
            sum += i as f64 / u as f64;
            defined += 1;
        }
    }
    Ok(match aggregation {
        Aggregation::PerFrame => (defined > 0).then(|| sum / defined as f64),
        Aggregation::Global => (union > 0).then(|| inter as f64 / union as f64),
    })
}

pub fn mean_volumetric_iou(frames: &[FrameEvaluation], aggregation: Aggregation) -> Result<Option<f64>> {
    let mut sum = 0.0;
    let mut defined = 0usize;
    let (mut inter, mut union) = (0.0, 0.0);
    for (gt, est) in full_frames(frames) {
        let (i, u) = volume_sums(gt, est)?;
        inter += i;
        union += u;
        if u > 0.0 {
            sum += i / u;
            defined += 1;
        }
    }
    Ok(match aggregation {
        Aggregation::PerFrame => (defined > 0).then(|| sum / defined as f64),
        Aggregation::Global => (union > 0.0).then(|| inter / union),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelMetrics {
    /// Thumb, index, middle, ring, pinky.
    pub finger_accuracy: [f64; 5],
    /// Over pairs whose ground-truth force is specified; `None` if there are none.
    pub force_accuracy: Option<f64>,
    pub pairs: usize,
    pub force_pairs: usize,
}

/// Per-element agreement between `(estimated, truth)` label pairs.
pub fn label_metrics(pairs: &[(ContactLabel, ContactLabel)]) -> Result<LabelMetrics> {
    if pairs.is_empty() {
        return Err(Error::invalid("label metrics need at least one pair"));
    }
    let mut finger_hits = [0usize; 5];
    let (mut force_hits, mut force_pairs) = (0usize, 0usize);
    for (est, truth) in pairs {
        for (hits, (e, t)) in finger_hits.iter_mut().zip(est.fingers.iter().zip(&truth.fingers)) {
            *hits += usize::from(e == t);
        }
        if truth.force != Force::Unspecified {
            force_pairs += 1;
            force_hits += usize::from(est.force == truth.force);
        }
    }
    let n = pairs.len() as f64;
    Ok(LabelMetrics {
        finger_accuracy: finger_hits.map(|h| h as f64 / n),
        force_accuracy: (force_pairs > 0).then(|| force_hits as f64 / force_pairs as f64),
        pairs: pairs.len(),
        force_pairs,
    })
}

/// Single-character edits (insertion, deletion, substitution) between two
/// strings, counted over Unicode scalar values.
pub fn char_errors(reference: &str, typed: &str) -> usize {
    let a: Vec<char> = reference.chars().collect();
    let b: Vec<char> = typed.chars().collect();
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        core::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypingTranscript {
    pub reference: String,
    pub typed: String,
    /// Seconds from the first keystroke to Enter.
    pub elapsed_s: f64,
}

impl TypingTranscript {
    pub fn new(reference: impl Into<String>, typed: impl Into<String>, elapsed_s: f64) -> Result<Self> {
        if !(elapsed_s > 0.0 && elapsed_s.is_finite()) {
            return Err(Error::invalid("typing time must be positive"));
        }
        Ok(Self { reference: reference.into(), typed: typed.into(), elapsed_s })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypingScore {
    pub characters: usize,
    pub errors: usize,
    pub elapsed_s: f64,
    pub wpm: f64,
    pub net_wpm: f64,
}

/// `WPM = (c/5)/(t/60)` and `Net WPM = (c/5 - e)/(t/60)` where `c` counts
/// typed characters and `e` is [`char_errors`] against the reference.
pub fn net_wpm(transcript: &TypingTranscript) -> TypingScore {
    let c = transcript.typed.chars().count();
    let e = char_errors(&transcript.reference, &transcript.typed);
    let minutes = transcript.elapsed_s / 60.0;
    let words = c as f64 / 5.0;
    TypingScore {
        characters: c,
        errors: e,
        elapsed_s: transcript.elapsed_s,
        wpm: words / minutes,
        net_wpm: (words - e as f64) / minutes,
    }
}

/// Aggregate evaluation over a set of frames. Pressure metrics are absent
/// when no frame carries ground-truth pressure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub frames: usize,
    pub full_frames: usize,
    pub weak_frames: usize,
    pub threshold_kpa: f64,
    pub contact_accuracy: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub contact_iou: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub contact_iou_global: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub volumetric_iou: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub volumetric_iou_global: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub labels: Option<LabelMetrics>,
}

pub fn evaluate_frames(frames: &[FrameEvaluation], threshold: f64) -> Result<MetricsReport> {
    let contact_accuracy = contact_accuracy(frames, threshold)?;
    let full = frames.iter().filter(|f| f.truth_pressure.is_some()).count();
    let pairs: Vec<_> = frames.iter().filter_map(|f| f.estimated_label.map(|e| (e, f.truth_label))).collect();
    let (contact_iou, contact_iou_global, volumetric_iou, volumetric_iou_global) = if full > 0 {
        (
            mean_contact_iou(frames, threshold, Aggregation::PerFrame)?,
            mean_contact_iou(frames, threshold, Aggregation::Global)?,
            mean_volumetric_iou(frames, Aggregation::PerFrame)?,
            mean_volumetric_iou(frames, Aggregation::Global)?,
        )
    } else {
        (None, None, None, None)
    };
    Ok(MetricsReport {
        frames: frames.len(),
        full_frames: full,
        weak_frames: frames.len() - full,
        threshold_kpa: threshold,
        contact_accuracy,
        contact_iou,
        contact_iou_global,
        volumetric_iou,
        volumetric_iou_global,
        labels: if pairs.is_empty() { None } else { Some(label_metrics(&pairs)?) },
    })
}
