//! Synthetic data-collection sessions.
//!
//! A participant is prompted with a fingertip combination and a force level.
//! Fully-labeled sessions press and release repeatedly on a pressure sensor;
//! weakly-labeled sessions hold the prompted action and carry only the
//! contact label. Every frame also gets a companion [`FeatureMap`], the
//! stand-in for the camera image: weak sessions see it through an
//! appearance shift so the two domains differ in distribution but agree on
//! labels.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::losses::{ContactLabel, Force};
use crate::nn::{Domain, FeatureMap, Sample, ToyDataset};
use crate::pressure::{quantize, BinSpec, PressureImage};
use crate::touch::KeyLayout;
use crate::CONTACT_THRESHOLD_KPA;

pub const FINGER_NAMES: [&str; 5] = ["thumb", "index", "middle", "ring", "pinky"];

/// The eight prompted fingertip combinations, as thumb..pinky flags.
pub const FINGER_COMBINATIONS: [[bool; 5]; 8] = [
    [false, true, false, false, false],
    [true, false, false, false, false],
    [true, true, false, false, false],
    [false, true, true, false, false],
    [false, false, true, false, false],
    [false, false, false, true, false],
    [false, false, false, false, true],
    [true, true, true, true, true],
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForceLevel {
    Low,
    High,
    /// Slide with unspecified force.
    Slide,
    /// Hover the fingertips just above the surface.
    NoContact,
}

pub const FORCE_LEVELS: [ForceLevel; 4] = [ForceLevel::Low, ForceLevel::High, ForceLevel::Slide, ForceLevel::NoContact];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ActionPrompt {
    pub fingers: [bool; 5],
    pub force_level: ForceLevel,
}

impl ActionPrompt {
    /// All 32 prompts: every combination at every force level.
    pub fn all() -> Vec<ActionPrompt> {
        FINGER_COMBINATIONS
            .iter()
            .flat_map(|&fingers| FORCE_LEVELS.iter().map(move |&force_level| ActionPrompt { fingers, force_level }))
            .collect()
    }

    pub fn text(&self) -> String {
        let names: Vec<&str> = FINGER_NAMES.iter().zip(&self.fingers).filter(|(_, &f)| f).map(|(n, _)| *n).collect();
        let who = if names.len() == 5 { String::from("all fingers") } else { names.join(" and ") };
        match self.force_level {
            ForceLevel::Low => format!("press {who}, low force"),
            ForceLevel::High => format!("press {who}, high force"),
            ForceLevel::Slide => format!("slide {who}"),
            ForceLevel::NoContact => format!("hover {who}, no contact"),
        }
    }

    fn force(&self) -> Force {
        match self.force_level {
            ForceLevel::Low => Force::Low,
            ForceLevel::High => Force::High,
            ForceLevel::Slide | ForceLevel::NoContact => Force::Unspecified,
        }
    }
}

/// Appearance shift applied to weakly-labeled feature maps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DomainShift {
    /// Mean additive bias of the weak domain's appearance.
    pub appearance_bias: f64,
    /// Per-session spread of that bias.
    pub bias_spread: f64,
    /// Std-dev of per-pixel texture noise (both domains).
    pub texture_noise: f64,
}

impl Default for DomainShift {
    fn default() -> Self {
        Self { appearance_bias: 0.6, bias_spread: 0.3, texture_noise: 0.05 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub width: usize,
    pub height: usize,
    pub frame_rate_hz: f64,
    pub seed: u64,
    /// Mean total force for low / high prompts, N.
    pub force_low_n: f64,
    pub force_high_n: f64,
    /// Log-normal spread of the sampled total force.
    pub force_spread: f64,
    /// Std-dev of a fingertip blob across the finger, px.
    pub blob_sigma_px: f64,
    /// Sensor pixel pitch, mm; converts force to pressure.
    pub pixel_pitch_mm: f64,
    /// Frames per press-release cycle in fully-labeled sessions.
    pub frames_per_cycle: usize,
    pub cycles_per_session: usize,
    /// Frames per weakly-labeled session.
    pub weak_frames_per_session: usize,
    /// Sessions recorded per participant.
    pub sessions_per_participant: usize,
    pub shift: DomainShift,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            width: 185,
            height: 105,
            frame_rate_hz: 15.0,
            seed: 0,
            force_low_n: 3.6,
            force_high_n: 19.6,
            force_spread: 0.3,
            blob_sigma_px: 3.0,
            pixel_pitch_mm: 1.25,
            frames_per_cycle: 15,
            cycles_per_session: 2,
            weak_frames_per_session: 30,
            sessions_per_participant: 4,
            shift: DomainShift::default(),
        }
    }
}

impl SynthConfig {
    /// Small grid used by the toy trainer and tests.
    pub fn toy(seed: u64) -> Self {
        Self {
            width: 16,
            height: 16,
            seed,
            blob_sigma_px: 1.2,
            pixel_pitch_mm: 4.0,
            frames_per_cycle: 8,
            cycles_per_session: 1,
            weak_frames_per_session: 8,
            sessions_per_participant: 6,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::invalid("grid dimensions must be positive"));
        }
        let positive = [
            self.frame_rate_hz,
            self.force_low_n,
            self.force_high_n,
            self.blob_sigma_px,
            self.pixel_pitch_mm,
        ];
        if positive.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::invalid("frame rate, forces, blob size and pixel pitch must be positive"));
        }
        if self.frames_per_cycle < 2 || self.cycles_per_session == 0 || self.weak_frames_per_session == 0 {
            return Err(Error::invalid("sessions need at least one cycle of two frames"));
        }
        Ok(())
    }

    /// kPa·px² per newton.
    fn pressure_per_newton(&self) -> f64 {
        let area_m2 = (self.pixel_pitch_mm * 1e-3) * (self.pixel_pitch_mm * 1e-3);
        1.0 / (area_m2 * 1000.0)
    }
}

/// Fingertip centers and blob shapes of one participant's hand on the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct HandPose {
    pub fingertips: [(f64, f64); 5],
    /// (sigma_x, sigma_y) per fingertip, px.
    pub sigmas: [(f64, f64); 5],
}

const CANONICAL_TIPS: [(f64, f64); 5] = [(0.22, 0.72), (0.38, 0.30), (0.52, 0.22), (0.66, 0.30), (0.80, 0.46)];

impl HandPose {
    pub fn sample(cfg: &SynthConfig, rng: &mut impl Rng) -> Self {
        let (w, h) = (cfg.width as f64, cfg.height as f64);
        let dx = rng.random_range(-0.04..0.04) * w;
        let dy = rng.random_range(-0.04..0.04) * h;
        let mut fingertips = [(0.0, 0.0); 5];
        let mut sigmas = [(0.0, 0.0); 5];
        for i in 0..5 {
            let (cx, cy) = CANONICAL_TIPS[i];
            fingertips[i] = (
                cx * w + dx + rng.random_range(-0.02..0.02) * w,
                cy * h + dy + rng.random_range(-0.02..0.02) * h,
            );
            let s = cfg.blob_sigma_px * rng.random_range(0.85..1.15);
            sigmas[i] = (s, s * 1.3);
        }
        Self { fingertips, sigmas }
    }
}

/// Raised-cosine press/hold/release envelope over one press cycle.
pub fn press_envelope(phase: f64) -> f64 {
    const RAMP: f64 = 0.3;
    if !(0.0..=1.0).contains(&phase) {
        return 0.0;
    }
    if phase < RAMP {
        0.5 * (1.0 - libm::cos(PI * phase / RAMP))
    } else if phase > 1.0 - RAMP {
        0.5 * (1.0 - libm::cos(PI * (1.0 - phase) / RAMP))
    } else {
        1.0
    }
}

fn sample_normal(rng: &mut impl Rng) -> f64 {
    // Box-Muller
    let u1: f64 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random();
    libm::sqrt(-2.0 * libm::log(u1)) * libm::cos(2.0 * PI * u2)
}

/// Total force for one press, N. Slides use the geometric mean of the two
/// prompted means.
fn sample_total_force(level: ForceLevel, cfg: &SynthConfig, rng: &mut impl Rng) -> f64 {
    let mean = match level {
        ForceLevel::Low => cfg.force_low_n,
        ForceLevel::High => cfg.force_high_n,
        ForceLevel::Slide => libm::sqrt(cfg.force_low_n * cfg.force_high_n),
        ForceLevel::NoContact => return 0.0,
    };
    let s = cfg.force_spread;
    // log-normal with the requested mean
    mean * libm::exp(s * sample_normal(rng) - 0.5 * s * s)
}

/// One rendered frame.
#[derive(Debug, Clone, PartialEq)]
pub struct RenderedFrame {
    pub pressure: PressureImage,
    pub label: ContactLabel,
    /// Peak pressure of each fingertip blob, kPa.
    pub peaks: [f64; 5],
}

/// Per-press force draw, shared by the frames of one press cycle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PressForce {
    pub total_n: f64,
    /// Fraction of the total carried by each finger.
    pub shares: [f64; 5],
}

impl PressForce {
    pub fn sample(prompt: &ActionPrompt, cfg: &SynthConfig, rng: &mut impl Rng) -> Self {
        let total_n = sample_total_force(prompt.force_level, cfg, rng);
        let mut shares = [0.0; 5];
        for (s, &f) in shares.iter_mut().zip(&prompt.fingers) {
            if f {
                *s = 1.0 + rng.random_range(-0.2..0.2);
            }
        }
        let sum: f64 = shares.iter().sum();
        if sum > 0.0 {
            shares.iter_mut().for_each(|s| *s /= sum);
        }
        Self { total_n, shares }
    }
}

/// Renders one frame at `phase` of a press cycle: an anisotropic Gaussian
/// per contacting fingertip, amplitudes matched to the force share times the
/// envelope. A finger is labeled in contact iff its blob peak reaches
/// 1 kPa; frames with no finger in contact get the no-contact label.
pub fn render_frame(
    prompt: &ActionPrompt,
    phase: f64,
    pose: &HandPose,
    force: &PressForce,
    cfg: &SynthConfig,
) -> Result<RenderedFrame> {
    let envelope = if prompt.force_level == ForceLevel::NoContact { 0.0 } else { press_envelope(phase) };
    let per_newton = cfg.pressure_per_newton();
    let slide = if prompt.force_level == ForceLevel::Slide { (phase - 0.5) * 0.1 * cfg.width as f64 } else { 0.0 };
    let mut peaks = [0.0; 5];
    let mut blobs = Vec::new();
    for i in 0..5 {
        if !prompt.fingers[i] || envelope == 0.0 {
            continue;
        }
        let (sx, sy) = pose.sigmas[i];
        let integral = force.total_n * force.shares[i] * envelope * per_newton;
        // continuous Gaussian integral is 2π σx σy
        let amp = integral / (2.0 * PI * sx * sy);
        peaks[i] = amp;
        let (cx, cy) = pose.fingertips[i];
        blobs.push((cx + slide, cy, sx, sy, amp));
    }
    let pressure = PressureImage::from_fn(cfg.width, cfg.height, |x, y| {
        blobs
            .iter()
            .map(|&(cx, cy, sx, sy, amp)| {
                let dx = (x as f64 - cx) / sx;
                let dy = (y as f64 - cy) / sy;
                let q = 0.5 * (dx * dx + dy * dy);
                if q > 18.0 { 0.0 } else { amp * libm::exp(-q) }
            })
            .sum()
    })?;
    let mut fingers = [false; 5];
    for (f, &p) in fingers.iter_mut().zip(&peaks) {
        *f = p >= CONTACT_THRESHOLD_KPA;
    }
    let label = if fingers.iter().any(|&f| f) { ContactLabel::new(fingers, prompt.force()) } else { ContactLabel::NO_CONTACT };
    Ok(RenderedFrame { pressure, label, peaks })
}

/// Renders the camera stand-in for a frame.
///
/// Channel 0 responds to pressure (saturating), channel 1 shows every
/// fingertip of the hand whether or not it touches, channel 2 is the
/// surface appearance. Weak-domain frames add `bias` to every channel.
pub fn render_features(
    pressure: &PressureImage,
    pose: &HandPose,
    bias: f64,
    noise: f64,
    rng: &mut impl Rng,
) -> FeatureMap {
    let (w, h) = (pressure.width(), pressure.height());
    let mut data = Vec::with_capacity(w * h * 3);
    for y in 0..h {
        for x in 0..w {
            let p = pressure.get(x, y);
            let contact = p / (p + 3.0);
            let hand: f64 = pose
                .fingertips
                .iter()
                .zip(&pose.sigmas)
                .map(|(&(cx, cy), &(sx, sy))| {
                    let dx = (x as f64 - cx) / (1.5 * sx);
                    let dy = (y as f64 - cy) / (1.5 * sy);
                    libm::exp(-0.5 * (dx * dx + dy * dy))
                })
                .sum();
            data.push(contact + bias + noise * sample_normal(rng));
            data.push(0.5 * hand + bias + noise * sample_normal(rng));
            data.push(bias + noise * sample_normal(rng));
        }
    }
    FeatureMap::new(w, h, 3, data).expect("finite by construction")
}

/// One frame of a recorded or synthetic session. Pressure is present iff
/// the record is fully labeled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionRecord {
    pub session_id: String,
    pub participant_id: u32,
    pub frame_index: u64,
    pub timestamp: f64,
    pub domain: Domain,
    pub contact_label: ContactLabel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pressure: Option<PressureImage>,
    pub prompt: String,
}

impl SessionRecord {
    pub fn validate(&self) -> Result<()> {
        match (self.domain, &self.pressure) {
            (Domain::Full, None) => Err(Error::invalid("fully-labeled record without pressure")),
            (Domain::Weak, Some(_)) => Err(Error::invalid("weakly-labeled record carries pressure")),
            _ if !self.timestamp.is_finite() => Err(Error::invalid("non-finite timestamp")),
            _ => Ok(()),
        }
    }
}

/// A generated frame: the record, its companion feature map, and the
/// pressure that produced it (kept even for weak records, where it is not
/// part of the record).
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticFrame {
    pub record: SessionRecord,
    pub features: FeatureMap,
    pub hidden_pressure: PressureImage,
}

impl SyntheticFrame {
    pub fn to_sample(&self, bins: &BinSpec) -> Sample {
        let target = self.record.pressure.as_ref().map(|p| quantize(p, bins));
        Sample { features: self.features.clone(), label: self.record.contact_label, pressure: self.record.pressure.clone(), target }
    }
}

/// Participants assigned to each split. Train and test participants must
/// not overlap.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub full_train: Vec<u32>,
    pub full_test: Vec<u32>,
    pub weak_train: Vec<u32>,
    pub weak_test: Vec<u32>,
}

impl SplitPlan {
    /// Consecutive participant ids for each split, in the order
    /// full train, full test, weak train, weak test.
    pub fn sequential(full_train: u32, full_test: u32, weak_train: u32, weak_test: u32) -> Self {
        let mut next = 0u32;
        let mut take = |n: u32| {
            let ids: Vec<u32> = (next..next + n).collect();
            next += n;
            ids
        };
        Self { full_train: take(full_train), full_test: take(full_test), weak_train: take(weak_train), weak_test: take(weak_test) }
    }

    pub fn validate(&self) -> Result<()> {
        let train: BTreeSet<u32> = self.full_train.iter().chain(&self.weak_train).copied().collect();
        let test: BTreeSet<u32> = self.full_test.iter().chain(&self.weak_test).copied().collect();
        if let Some(p) = train.intersection(&test).next() {
            return Err(Error::invalid(format!("participant {p} appears in both train and test splits")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SyntheticDataset {
    pub full_train: Vec<SyntheticFrame>,
    pub full_test: Vec<SyntheticFrame>,
    pub weak_train: Vec<SyntheticFrame>,
    pub weak_test: Vec<SyntheticFrame>,
}

impl SyntheticDataset {
    pub fn to_toy(&self, bins: &BinSpec) -> ToyDataset {
        let conv = |v: &[SyntheticFrame]| v.iter().map(|f| f.to_sample(bins)).collect();
        ToyDataset {
            full_train: conv(&self.full_train),
            weak_train: conv(&self.weak_train),
            full_val: conv(&self.full_test),
            weak_val: conv(&self.weak_test),
        }
    }

    /// All records, split by split, in generation order.
    pub fn records(&self) -> impl Iterator<Item = &SessionRecord> {
        self.full_train
            .iter()
            .chain(&self.full_test)
            .chain(&self.weak_train)
            .chain(&self.weak_test)
            .map(|f| &f.record)
    }
}

/// Stable per-session seed from the global seed and session coordinates.
fn session_seed(seed: u64, split: u64, participant: u32, session: usize) -> u64 {
    let mut z = seed ^ split.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ ((participant as u64) << 20) ^ (session as u64);
    // splitmix64 finalizer
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn generate_split(cfg: &SynthConfig, participants: &[u32], domain: Domain, split: u64, tag: &str) -> Result<Vec<SyntheticFrame>> {
    let prompts = ActionPrompt::all();
    let mut out = Vec::new();
    for &participant in participants {
        let mut pose_rng = ChaCha8Rng::seed_from_u64(session_seed(cfg.seed, split, participant, usize::MAX));
        let pose = HandPose::sample(cfg, &mut pose_rng);
        for session in 0..cfg.sessions_per_participant {
            let mut rng = ChaCha8Rng::seed_from_u64(session_seed(cfg.seed, split, participant, session));
            let prompt = prompts[rng.random_range(0..prompts.len())];
            let session_id = format!("{tag}-p{participant:03}-s{session:02}");
            let bias = match domain {
                Domain::Full => 0.0,
                Domain::Weak => cfg.shift.appearance_bias + cfg.shift.bias_spread * sample_normal(&mut rng),
            };
            let n_frames = match domain {
                Domain::Full => cfg.frames_per_cycle * cfg.cycles_per_session,
                Domain::Weak => cfg.weak_frames_per_session,
            };
            let mut force = PressForce::sample(&prompt, cfg, &mut rng);
            for frame in 0..n_frames {
                let k = frame % cfg.frames_per_cycle;
                if k == 0 && frame > 0 {
                    force = PressForce::sample(&prompt, cfg, &mut rng);
                }
                let phase = k as f64 / (cfg.frames_per_cycle - 1) as f64;
                let rendered = render_frame(&prompt, phase, &pose, &force, cfg)?;
                let features = render_features(&rendered.pressure, &pose, bias, cfg.shift.texture_noise, &mut rng);
                let record = SessionRecord {
                    session_id: session_id.clone(),
                    participant_id: participant,
                    frame_index: frame as u64,
                    timestamp: frame as f64 / cfg.frame_rate_hz,
                    domain,
                    contact_label: rendered.label,
                    pressure: (domain == Domain::Full).then(|| rendered.pressure.clone()),
                    prompt: prompt.text(),
                };
                out.push(SyntheticFrame { record, features, hidden_pressure: rendered.pressure });
            }
        }
    }
    Ok(out)
}

/// Generates all four splits. Deterministic in `cfg.seed`.
pub fn generate_dataset(cfg: &SynthConfig, plan: &SplitPlan) -> Result<SyntheticDataset> {
    cfg.validate()?;
    plan.validate()?;
    Ok(SyntheticDataset {
        full_train: generate_split(cfg, &plan.full_train, Domain::Full, 0, "full-train")?,
        full_test: generate_split(cfg, &plan.full_test, Domain::Full, 1, "full-test")?,
        weak_train: generate_split(cfg, &plan.weak_train, Domain::Weak, 2, "weak-train")?,
        weak_test: generate_split(cfg, &plan.weak_test, Domain::Weak, 3, "weak-test")?,
    })
}

/// Timing of a synthetic typing session.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TypingPlan {
    /// Frames a key is held down.
    pub hold_frames: usize,
    /// Frames of no contact between keys.
    pub gap_frames: usize,
    /// Peak pressure of a tap, kPa.
    pub tap_pressure_kpa: f64,
    pub tap_sigma_px: f64,
}

impl Default for TypingPlan {
    fn default() -> Self {
        Self { hold_frames: 3, gap_frames: 2, tap_pressure_kpa: 8.0, tap_sigma_px: 1.5 }
    }
}

/// Records of a participant tapping `keys` (layout labels) in order on the
/// layout's surface, one Gaussian tap per key at the key center. The prompt
/// of every record is the sentence to type.
pub fn typing_session(
    sentence: &str,
    keys: &[&str],
    layout: &KeyLayout,
    cfg: &SynthConfig,
    plan: &TypingPlan,
    session_id: &str,
) -> Result<Vec<SessionRecord>> {
    cfg.validate()?;
    if plan.hold_frames == 0 {
        return Err(Error::invalid("taps must last at least one frame"));
    }
    let mut records = Vec::new();
    let push = |records: &mut Vec<SessionRecord>, pressure: PressureImage, contact: bool| {
        let frame_index = records.len() as u64;
        let label = if contact {
            ContactLabel::new([false, true, false, false, false], Force::Unspecified)
        } else {
            ContactLabel::NO_CONTACT
        };
        records.push(SessionRecord {
            session_id: String::from(session_id),
            participant_id: 0,
            frame_index,
            timestamp: frame_index as f64 / cfg.frame_rate_hz,
            domain: Domain::Full,
            contact_label: label,
            pressure: Some(pressure),
            prompt: String::from(sentence),
        });
    };
    let blank = PressureImage::zeros(cfg.width, cfg.height);
    for _ in 0..plan.gap_frames.max(1) {
        push(&mut records, blank.clone(), false);
    }
    for key in keys {
        let (cx, cy) = layout
            .key(key)
            .ok_or_else(|| Error::invalid(format!("key {key:?} is not in the layout")))?
            .center();
        let s = plan.tap_sigma_px;
        let tap = PressureImage::from_fn(cfg.width, cfg.height, |x, y| {
            let dx = x as f64 - cx;
            let dy = y as f64 - cy;
            plan.tap_pressure_kpa * libm::exp(-(dx * dx + dy * dy) / (2.0 * s * s))
        })?;
        for _ in 0..plan.hold_frames {
            push(&mut records, tap.clone(), true);
        }
        for _ in 0..plan.gap_frames {
            push(&mut records, blank.clone(), false);
        }
    }
    // trailing release frames so the last key-up is observed
    for _ in 0..3 {
        push(&mut records, blank.clone(), false);
    }
    Ok(records)
}

/// Keys to tap to type `text` followed by Enter, using the layout's
/// conventional labels (`Space`, `Enter`).
pub fn keys_for_text(text: &str) -> Vec<String> {
    let mut keys: Vec<String> = text
        .chars()
        .map(|c| if c == ' ' { String::from("Space") } else { c.to_lowercase().collect() })
        .collect();
    keys.push(String::from("Enter"));
    keys
}
