use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{FeatureMap, Sample};
use crate::error::{Error, Result};
use crate::losses::{
    bce_with_logit, combined_loss, contact_label_loss, structure_aware_ce, GradientReversal, LossBreakdown,
    LossWeights, Reduction,
};
use crate::pressure::BinMap;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub hidden_channels: usize,
    /// Hidden width of the 2-layer contact-label head.
    pub contact_hidden: usize,
    /// Hidden width of the 2-layer domain discriminator.
    pub disc_hidden: usize,
    pub n_bins: usize,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            width: 16,
            height: 16,
            channels: 3,
            hidden_channels: 8,
            contact_hidden: 8,
            disc_hidden: 8,
            n_bins: 9,
            seed: 0,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let dims = [
            ("width", self.width),
            ("height", self.height),
            ("channels", self.channels),
            ("hidden_channels", self.hidden_channels),
            ("contact_hidden", self.contact_hidden),
            ("disc_hidden", self.disc_hidden),
            ("n_bins", self.n_bins),
        ];
        for (name, v) in dims {
            if v == 0 {
                return Err(Error::invalid(alloc::format!("{name} must be at least 1")));
            }
        }
        if !self.width.is_multiple_of(4) || !self.height.is_multiple_of(4) {
            return Err(Error::invalid("input width and height must be multiples of 4"));
        }
        Ok(())
    }

    fn bottleneck(&self) -> (usize, usize) {
        (self.width / 4, self.height / 4)
    }
}

/// Named parameter arrays, in storage order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ParamSlot {
    Enc1Weight,
    Enc1Bias,
    Enc2Weight,
    Enc2Bias,
    PressureWeight,
    PressureBias,
    ContactFc1Weight,
    ContactFc1Bias,
    ContactFc2Weight,
    ContactFc2Bias,
    DiscFc1Weight,
    DiscFc1Bias,
    DiscFc2Weight,
    DiscFc2Bias,
}

impl ParamSlot {
    pub const ALL: [ParamSlot; 14] = [
        ParamSlot::Enc1Weight,
        ParamSlot::Enc1Bias,
        ParamSlot::Enc2Weight,
        ParamSlot::Enc2Bias,
        ParamSlot::PressureWeight,
        ParamSlot::PressureBias,
        ParamSlot::ContactFc1Weight,
        ParamSlot::ContactFc1Bias,
        ParamSlot::ContactFc2Weight,
        ParamSlot::ContactFc2Bias,
        ParamSlot::DiscFc1Weight,
        ParamSlot::DiscFc1Bias,
        ParamSlot::DiscFc2Weight,
        ParamSlot::DiscFc2Bias,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ParamSlot::Enc1Weight => "encoder.conv1.weight",
            ParamSlot::Enc1Bias => "encoder.conv1.bias",
            ParamSlot::Enc2Weight => "encoder.conv2.weight",
            ParamSlot::Enc2Bias => "encoder.conv2.bias",
            ParamSlot::PressureWeight => "pressure_head.weight",
            ParamSlot::PressureBias => "pressure_head.bias",
            ParamSlot::ContactFc1Weight => "contact_head.fc1.weight",
            ParamSlot::ContactFc1Bias => "contact_head.fc1.bias",
            ParamSlot::ContactFc2Weight => "contact_head.fc2.weight",
            ParamSlot::ContactFc2Bias => "contact_head.fc2.bias",
            ParamSlot::DiscFc1Weight => "discriminator.fc1.weight",
            ParamSlot::DiscFc1Bias => "discriminator.fc1.bias",
            ParamSlot::DiscFc2Weight => "discriminator.fc2.weight",
            ParamSlot::DiscFc2Bias => "discriminator.fc2.bias",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|s| s.name() == name)
    }

    /// Shape of the array; weights are `[out, ..., in]`.
    pub fn shape(self, c: &ModelConfig) -> Vec<usize> {
        let h = c.hidden_channels;
        match self {
            ParamSlot::Enc1Weight => vec![h, 2, 2, c.channels],
            ParamSlot::Enc2Weight => vec![h, 2, 2, h],
            ParamSlot::Enc1Bias | ParamSlot::Enc2Bias => vec![h],
            ParamSlot::PressureWeight => vec![c.n_bins, h],
            ParamSlot::PressureBias => vec![c.n_bins],
            ParamSlot::ContactFc1Weight => vec![c.contact_hidden, h],
            ParamSlot::ContactFc1Bias => vec![c.contact_hidden],
            ParamSlot::ContactFc2Weight => vec![6, c.contact_hidden],
            ParamSlot::ContactFc2Bias => vec![6],
            ParamSlot::DiscFc1Weight => vec![c.disc_hidden, h],
            ParamSlot::DiscFc1Bias => vec![c.disc_hidden],
            ParamSlot::DiscFc2Weight => vec![1, c.disc_hidden],
            ParamSlot::DiscFc2Bias => vec![1],
        }
    }

    fn fan_in(self, c: &ModelConfig) -> Option<usize> {
        let shape = self.shape(c);
        match self {
            ParamSlot::Enc1Weight
            | ParamSlot::Enc2Weight
            | ParamSlot::PressureWeight
            | ParamSlot::ContactFc1Weight
            | ParamSlot::ContactFc2Weight
            | ParamSlot::DiscFc1Weight
            | ParamSlot::DiscFc2Weight => Some(shape[1..].iter().product()),
            _ => None,
        }
    }
}

/// Offsets of every slot inside the flat parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Offsets {
    start: [usize; 14],
    total: usize,
}

impl Offsets {
    fn new(c: &ModelConfig) -> Self {
        let mut start = [0; 14];
        let mut total = 0;
        for (i, slot) in ParamSlot::ALL.iter().enumerate() {
            start[i] = total;
            total += slot.shape(c).iter().product::<usize>();
        }
        Self { start, total }
    }

    #[inline]
    fn of(&self, slot: ParamSlot) -> usize {
        self.start[slot as usize]
    }
}

/// Model parameters as one flat vector plus the config that gives it shape.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    config: ModelConfig,
    offsets: Offsets,
    values: Vec<f64>,
}

/// Everything `forward` produces for one input.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardOutput {
    pub pressure_logits: BinMap,
    pub pooled_features: Vec<f64>,
    pub contact_logits: [f64; 6],
    pub domain_logit: f64,
}

/// Whether the encoder sees the domain gradient reversed (training) or as
/// the true gradient of the combined loss (finite-difference checks).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GradientMode {
    Reversed,
    True,
}

/// Loss settings for one training step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossConfig {
    pub weights: LossWeights,
    pub reduction: Reduction,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self { weights: LossWeights::default(), reduction: Reduction::Sum }
    }
}

/// Per-sample gradient of the weighted domain term with respect to the
/// pooled features: as computed by the discriminator, and as delivered to
/// the encoder.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainFeatureGrads {
    pub unreversed: Vec<f64>,
    pub encoder_side: Vec<f64>,
}

struct Cache {
    act1: Vec<f64>,
    act2: Vec<f64>,
    pooled: Vec<f64>,
    contact_hidden: Vec<f64>,
    disc_hidden: Vec<f64>,
    /// Pressure logits per bottleneck cell, `[cell][bin]`.
    cell_logits: Vec<f64>,
    contact_logits: [f64; 6],
    domain_logit: f64,
}

/// Upstream gradients entering the heads for one sample.
struct HeadGrads {
    cell_logits: Option<Vec<f64>>,
    contact_logits: [f64; 6],
    domain_logit: f64,
}

impl ModelParams {
    pub fn init(config: &ModelConfig) -> Result<Self> {
        config.validate()?;
        let offsets = Offsets::new(config);
        let mut values = vec![0.0; offsets.total];
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        for slot in ParamSlot::ALL {
            if let Some(fan_in) = slot.fan_in(config) {
                let bound = 1.0 / libm::sqrt(fan_in as f64);
                let start = offsets.of(slot);
                let len: usize = slot.shape(config).iter().product();
                for v in &mut values[start..start + len] {
                    *v = rng.random_range(-bound..bound);
                }
            }
        }
        Ok(Self { config: config.clone(), offsets, values })
    }

    /// Rebuilds parameters from named arrays, e.g. a checkpoint.
    pub fn from_named(config: &ModelConfig, arrays: &[(String, Vec<f64>)]) -> Result<Self> {
        config.validate()?;
        let offsets = Offsets::new(config);
        let mut values = vec![0.0; offsets.total];
        let mut seen = [false; 14];
        for (name, data) in arrays {
            let slot = ParamSlot::from_name(name)
                .ok_or_else(|| Error::invalid(alloc::format!("unknown parameter array {name}")))?;
            let len: usize = slot.shape(config).iter().product();
            if data.len() != len {
                return Err(Error::invalid(alloc::format!("parameter array {name} has wrong length")));
            }
            if data.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid(alloc::format!("parameter array {name} is not finite")));
            }
            let start = offsets.of(slot);
            values[start..start + len].copy_from_slice(data);
            seen[slot as usize] = true;
        }
        if let Some(i) = seen.iter().position(|s| !s) {
            return Err(Error::invalid(alloc::format!("missing parameter array {}", ParamSlot::ALL[i].name())));
        }
        Ok(Self { config: config.clone(), offsets, values })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn slot(&self, slot: ParamSlot) -> &[f64] {
        let start = self.offsets.of(slot);
        let len: usize = slot.shape(&self.config).iter().product();
        &self.values[start..start + len]
    }

    pub fn slot_mut(&mut self, slot: ParamSlot) -> &mut [f64] {
        let start = self.offsets.of(slot);
        let len: usize = slot.shape(&self.config).iter().product();
        &mut self.values[start..start + len]
    }

    /// Index range of a slot inside the flat vector.
    pub fn slot_range(&self, slot: ParamSlot) -> core::ops::Range<usize> {
        let start = self.offsets.of(slot);
        start..start + slot.shape(&self.config).iter().product::<usize>()
    }

    pub fn named_arrays(&self) -> Vec<(&'static str, Vec<usize>, &[f64])> {
        ParamSlot::ALL
            .iter()
            .map(|&s| (s.name(), s.shape(&self.config), self.slot(s)))
            .collect()
    }

    fn check_input(&self, input: &FeatureMap) -> Result<()> {
        let c = &self.config;
        if input.width() != c.width || input.height() != c.height || input.channels() != c.channels {
            return Err(Error::invalid(alloc::format!(
                "input is {}x{}x{}, model expects {}x{}x{}",
                input.width(),
                input.height(),
                input.channels(),
                c.width,
                c.height,
                c.channels
            )));
        }
        Ok(())
    }

    pub fn forward(&self, input: &FeatureMap) -> Result<ForwardOutput> {
        self.check_input(input)?;
        let cache = self.forward_cache(input);
        let c = &self.config;
        let (bw, _) = c.bottleneck();
        let n = c.n_bins;
        let mut logits = BinMap::zeros(c.width, c.height, n);
        {
            let data = logits.data_mut();
            for y in 0..c.height {
                for x in 0..c.width {
                    let cell = (y / 4) * bw + x / 4;
                    let dst = (y * c.width + x) * n;
                    data[dst..dst + n].copy_from_slice(&cache.cell_logits[cell * n..(cell + 1) * n]);
                }
            }
        }
        Ok(ForwardOutput {
            pressure_logits: logits,
            pooled_features: cache.pooled,
            contact_logits: cache.contact_logits,
            domain_logit: cache.domain_logit,
        })
    }

    fn forward_cache(&self, input: &FeatureMap) -> Cache {
        let c = &self.config;
        let hd = c.hidden_channels;
        let (w1, h1) = (c.width / 2, c.height / 2);
        let (w2, h2) = c.bottleneck();
        let act1 = strided_conv_tanh(
            input.data(),
            c.width,
            c.channels,
            w1,
            h1,
            hd,
            self.slot(ParamSlot::Enc1Weight),
            self.slot(ParamSlot::Enc1Bias),
        );
        let act2 = strided_conv_tanh(
            &act1,
            w1,
            hd,
            w2,
            h2,
            hd,
            self.slot(ParamSlot::Enc2Weight),
            self.slot(ParamSlot::Enc2Bias),
        );
        let cells = w2 * h2;
        let mut pooled = vec![0.0; hd];
        for cell in act2.chunks_exact(hd) {
            for (p, a) in pooled.iter_mut().zip(cell) {
                *p += a;
            }
        }
        for p in pooled.iter_mut() {
            *p /= cells as f64;
        }

        let n = c.n_bins;
        let pw = self.slot(ParamSlot::PressureWeight);
        let pb = self.slot(ParamSlot::PressureBias);
        let mut cell_logits = vec![0.0; cells * n];
        for (feat, out) in act2.chunks_exact(hd).zip(cell_logits.chunks_exact_mut(n)) {
            linear(pw, pb, feat, out);
        }

        let mut contact_hidden = vec![0.0; c.contact_hidden];
        linear(
            self.slot(ParamSlot::ContactFc1Weight),
            self.slot(ParamSlot::ContactFc1Bias),
            &pooled,
            &mut contact_hidden,
        );
        contact_hidden.iter_mut().for_each(|v| *v = libm::tanh(*v));
        let mut contact_logits = [0.0; 6];
        linear(
            self.slot(ParamSlot::ContactFc2Weight),
            self.slot(ParamSlot::ContactFc2Bias),
            &contact_hidden,
            &mut contact_logits,
        );

        let disc_in = GradientReversal.forward(&pooled);
        let mut disc_hidden = vec![0.0; c.disc_hidden];
        linear(
            self.slot(ParamSlot::DiscFc1Weight),
            self.slot(ParamSlot::DiscFc1Bias),
            disc_in,
            &mut disc_hidden,
        );
        disc_hidden.iter_mut().for_each(|v| *v = libm::tanh(*v));
        let mut domain_logit = [0.0];
        linear(
            self.slot(ParamSlot::DiscFc2Weight),
            self.slot(ParamSlot::DiscFc2Bias),
            &disc_hidden,
            &mut domain_logit,
        );

        Cache {
            act1,
            act2,
            pooled,
            contact_hidden,
            disc_hidden,
            cell_logits,
            contact_logits,
            domain_logit: domain_logit[0],
        }
    }

    /// Combined loss over a batch and its gradient with respect to every
    /// parameter.
    ///
    /// `L_p` is averaged over fully-labeled samples, `L_w` over all samples,
    /// and each side of the domain loss over its own domain's samples.
    pub fn loss_and_grad(
        &self,
        batch: &[&Sample],
        cfg: &LossConfig,
        mode: GradientMode,
    ) -> Result<(LossBreakdown, Vec<f64>)> {
        let (breakdown, grad, _) = self.run_batch(batch, cfg, mode, false)?;
        Ok((breakdown, grad))
    }

    pub fn loss(&self, batch: &[&Sample], cfg: &LossConfig) -> Result<LossBreakdown> {
        let mut l_p = 0.0;
        let mut l_w = 0.0;
        let (mut d_full, mut d_weak) = (0.0, 0.0);
        let counts = Counts::of(batch)?;
        for s in batch {
            self.check_input(&s.features)?;
            let cache = self.forward_cache(&s.features);
            if let Some(target) = &s.target {
                let logits = self.expand_logits(&cache.cell_logits);
                let (l, _) = structure_aware_ce(&logits, target, cfg.reduction)?;
                l_p += l;
                d_full += bce_with_logit(cache.domain_logit, true).0;
            } else {
                d_weak += bce_with_logit(cache.domain_logit, false).0;
            }
            l_w += contact_label_loss(&cache.contact_logits, &s.label).0;
        }
        Ok(counts.combine(l_p, l_w, d_full, d_weak, cfg.weights))
    }

    /// Domain-term gradients at the pooled features for every sample, taken
    /// from the same backward pass used in training.
    pub fn domain_feature_grads(&self, batch: &[&Sample], cfg: &LossConfig) -> Result<Vec<DomainFeatureGrads>> {
        let (_, _, traces) = self.run_batch(batch, cfg, GradientMode::Reversed, true)?;
        Ok(traces)
    }

    fn expand_logits(&self, cell_logits: &[f64]) -> BinMap {
        let c = &self.config;
        let (bw, _) = c.bottleneck();
        let n = c.n_bins;
        let mut data = vec![0.0; c.width * c.height * n];
        for y in 0..c.height {
            for x in 0..c.width {
                let cell = (y / 4) * bw + x / 4;
                let dst = (y * c.width + x) * n;
                data[dst..dst + n].copy_from_slice(&cell_logits[cell * n..(cell + 1) * n]);
            }
        }
        BinMap::new(c.width, c.height, n, data).expect("shape from config")
    }

    fn run_batch(
        &self,
        batch: &[&Sample],
        cfg: &LossConfig,
        mode: GradientMode,
        trace: bool,
    ) -> Result<(LossBreakdown, Vec<f64>, Vec<DomainFeatureGrads>)> {
        let counts = Counts::of(batch)?;
        let c = &self.config;
        let n = c.n_bins;
        let (bw, _) = c.bottleneck();
        let w = cfg.weights;
        let mut grad = vec![0.0; self.values.len()];
        let mut traces = Vec::new();
        let (mut l_p, mut l_w, mut d_full, mut d_weak) = (0.0, 0.0, 0.0, 0.0);

        for s in batch {
            self.check_input(&s.features)?;
            let cache = self.forward_cache(&s.features);
            let mut heads = HeadGrads { cell_logits: None, contact_logits: [0.0; 6], domain_logit: 0.0 };

            if let Some(target) = &s.target {
                let logits = self.expand_logits(&cache.cell_logits);
                let (l, g) = structure_aware_ce(&logits, target, cfg.reduction)?;
                l_p += l;
                let scale = 1.0 / counts.full as f64;
                let mut cell_grad = vec![0.0; cache.cell_logits.len()];
                for y in 0..c.height {
                    for x in 0..c.width {
                        let cell = (y / 4) * bw + x / 4;
                        for (dst, src) in cell_grad[cell * n..(cell + 1) * n].iter_mut().zip(g.pixel(x, y)) {
                            *dst += scale * src;
                        }
                    }
                }
                heads.cell_logits = Some(cell_grad);
                let (ld, gd) = bce_with_logit(cache.domain_logit, true);
                d_full += ld;
                heads.domain_logit = w.lambda2 * gd / counts.full as f64;
            } else {
                let (ld, gd) = bce_with_logit(cache.domain_logit, false);
                d_weak += ld;
                heads.domain_logit = w.lambda2 * gd / counts.weak as f64;
            }

            let (lw, gw) = contact_label_loss(&cache.contact_logits, &s.label);
            l_w += lw;
            let scale = w.lambda1 / batch.len() as f64;
            for (dst, src) in heads.contact_logits.iter_mut().zip(gw) {
                *dst = scale * src;
            }

            let t = self.backward(&s.features, &cache, &heads, mode, &mut grad);
            if trace {
                traces.push(t);
            }
        }

        let breakdown = counts.combine(l_p, l_w, d_full, d_weak, w);
        Ok((breakdown, grad, traces))
    }

    fn backward(
        &self,
        input: &FeatureMap,
        cache: &Cache,
        heads: &HeadGrads,
        mode: GradientMode,
        grad: &mut [f64],
    ) -> DomainFeatureGrads {
        let c = &self.config;
        let hd = c.hidden_channels;
        let n = c.n_bins;
        let (w1, h1) = (c.width / 2, c.height / 2);
        let (w2, h2) = c.bottleneck();
        let cells = w2 * h2;
        let mut d_act2 = vec![0.0; cache.act2.len()];

        // pressure head
        if let Some(cell_grad) = &heads.cell_logits {
            let pw = self.slot(ParamSlot::PressureWeight);
            let (gw_range, gb_range) = (self.slot_range(ParamSlot::PressureWeight), self.slot_range(ParamSlot::PressureBias));
            for cell in 0..cells {
                let feat = &cache.act2[cell * hd..(cell + 1) * hd];
                let g = &cell_grad[cell * n..(cell + 1) * n];
                linear_backward(
                    pw,
                    feat,
                    g,
                    &mut grad[gw_range.clone()],
                    Some(&mut d_act2[cell * hd..(cell + 1) * hd]),
                );
                for (db, gb) in grad[gb_range.clone()].iter_mut().zip(g) {
                    *db += gb;
                }
            }
        }

        // contact head
        let mut d_pooled = vec![0.0; hd];
        {
            let mut d_hidden = vec![0.0; c.contact_hidden];
            self.dense_backward(
                ParamSlot::ContactFc2Weight,
                ParamSlot::ContactFc2Bias,
                &cache.contact_hidden,
                &heads.contact_logits,
                grad,
                Some(&mut d_hidden),
            );
            for (d, h) in d_hidden.iter_mut().zip(&cache.contact_hidden) {
                *d *= 1.0 - h * h;
            }
            self.dense_backward(
                ParamSlot::ContactFc1Weight,
                ParamSlot::ContactFc1Bias,
                &cache.pooled,
                &d_hidden,
                grad,
                Some(&mut d_pooled),
            );
        }

        // discriminator, behind the reversal layer
        let mut d_disc_in = vec![0.0; hd];
        {
            let mut d_hidden = vec![0.0; c.disc_hidden];
            self.dense_backward(
                ParamSlot::DiscFc2Weight,
                ParamSlot::DiscFc2Bias,
                &cache.disc_hidden,
                &[heads.domain_logit],
                grad,
                Some(&mut d_hidden),
            );
            for (d, h) in d_hidden.iter_mut().zip(&cache.disc_hidden) {
                *d *= 1.0 - h * h;
            }
            self.dense_backward(
                ParamSlot::DiscFc1Weight,
                ParamSlot::DiscFc1Bias,
                &cache.pooled,
                &d_hidden,
                grad,
                Some(&mut d_disc_in),
            );
        }
        let encoder_side = match mode {
            GradientMode::Reversed => GradientReversal.backward(&d_disc_in),
            GradientMode::True => d_disc_in.clone(),
        };
        for (d, e) in d_pooled.iter_mut().zip(&encoder_side) {
            *d += e;
        }

        // spatial mean pooling
        let inv = 1.0 / cells as f64;
        for cell in d_act2.chunks_exact_mut(hd) {
            for (d, p) in cell.iter_mut().zip(&d_pooled) {
                *d += p * inv;
            }
        }

        // encoder
        for (d, a) in d_act2.iter_mut().zip(&cache.act2) {
            *d *= 1.0 - a * a;
        }
        let mut d_act1 = vec![0.0; cache.act1.len()];
        strided_conv_backward(
            &cache.act1,
            w1,
            hd,
            w2,
            h2,
            hd,
            self.slot(ParamSlot::Enc2Weight),
            &d_act2,
            grad,
            self.slot_range(ParamSlot::Enc2Weight),
            self.slot_range(ParamSlot::Enc2Bias),
            Some(&mut d_act1),
        );
        for (d, a) in d_act1.iter_mut().zip(&cache.act1) {
            *d *= 1.0 - a * a;
        }
        strided_conv_backward(
            input.data(),
            c.width,
            c.channels,
            w1,
            h1,
            hd,
            self.slot(ParamSlot::Enc1Weight),
            &d_act1,
            grad,
            self.slot_range(ParamSlot::Enc1Weight),
            self.slot_range(ParamSlot::Enc1Bias),
            None,
        );

        DomainFeatureGrads { unreversed: d_disc_in, encoder_side }
    }

    fn dense_backward(
        &self,
        weight: ParamSlot,
        bias: ParamSlot,
        input: &[f64],
        d_out: &[f64],
        grad: &mut [f64],
        d_input: Option<&mut [f64]>,
    ) {
        let w = self.slot(weight);
        let wr = self.slot_range(weight);
        let br = self.slot_range(bias);
        linear_backward(w, input, d_out, &mut grad[wr], d_input);
        for (db, g) in grad[br].iter_mut().zip(d_out) {
            *db += g;
        }
    }
}

struct Counts {
    full: usize,
    weak: usize,
    total: usize,
}

impl Counts {
    fn of(batch: &[&Sample]) -> Result<Self> {
        if batch.is_empty() {
            return Err(Error::invalid("empty batch"));
        }
        let full = batch.iter().filter(|s| s.target.is_some()).count();
        if batch.iter().any(|s| s.pressure.is_some() && s.target.is_none()) {
            return Err(Error::invalid("fully-labeled sample is missing its bin target"));
        }
        Ok(Self { full, weak: batch.len() - full, total: batch.len() })
    }

    fn combine(&self, l_p: f64, l_w: f64, d_full: f64, d_weak: f64, w: LossWeights) -> LossBreakdown {
        let l_p = (self.full > 0).then(|| l_p / self.full as f64);
        let mut l_d = 0.0;
        if self.full > 0 {
            l_d += d_full / self.full as f64;
        }
        if self.weak > 0 {
            l_d += d_weak / self.weak as f64;
        }
        combined_loss(l_p, l_w / self.total as f64, l_d, w)
    }
}

/// `out = W·x + b` for a row-major `[out, in]` weight.
#[inline]
fn linear(w: &[f64], b: &[f64], x: &[f64], out: &mut [f64]) {
    let k = x.len();
    for (o, (row, bias)) in out.iter_mut().zip(w.chunks_exact(k).zip(b)) {
        *o = bias + row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
    }
}

/// Accumulates `dW += d_out ⊗ x` and optionally `dx += Wᵀ·d_out`.
#[inline]
fn linear_backward(
    w: &[f64],
    x: &[f64],
    d_out: &[f64],
    d_w: &mut [f64],
    d_x: Option<&mut [f64]>,
) {
    let k = x.len();
    for (g, row) in d_out.iter().zip(d_w.chunks_exact_mut(k)) {
        for (dw, xi) in row.iter_mut().zip(x) {
            *dw += g * xi;
        }
    }
    if let Some(d_x) = d_x {
        for (g, row) in d_out.iter().zip(w.chunks_exact(k)) {
            for (dx, wi) in d_x.iter_mut().zip(row) {
                *dx += g * wi;
            }
        }
    }
}

/// 2×2 stride-2 convolution followed by tanh. Input `[in_h][in_w][cin]`,
/// output `[out_h][out_w][cout]`, weight `[cout][2][2][cin]`.
#[allow(clippy::too_many_arguments)]
fn strided_conv_tanh(
    input: &[f64],
    in_w: usize,
    cin: usize,
    out_w: usize,
    out_h: usize,
    cout: usize,
    weight: &[f64],
    bias: &[f64],
) -> Vec<f64> {
    let mut out = vec![0.0; out_w * out_h * cout];
    let mut patch = vec![0.0; 4 * cin];
    for y in 0..out_h {
        for x in 0..out_w {
            gather_patch(input, in_w, cin, x, y, &mut patch);
            let dst = &mut out[(y * out_w + x) * cout..(y * out_w + x + 1) * cout];
            linear(weight, bias, &patch, dst);
            dst.iter_mut().for_each(|v| *v = libm::tanh(*v));
        }
    }
    out
}

#[inline]
fn gather_patch(input: &[f64], in_w: usize, cin: usize, x: usize, y: usize, patch: &mut [f64]) {
    for ky in 0..2 {
        let row = (2 * y + ky) * in_w;
        let src = (row + 2 * x) * cin;
        patch[ky * 2 * cin..(ky + 1) * 2 * cin].copy_from_slice(&input[src..src + 2 * cin]);
    }
}

#[allow(clippy::too_many_arguments)]
fn strided_conv_backward(
    input: &[f64],
    in_w: usize,
    cin: usize,
    out_w: usize,
    out_h: usize,
    cout: usize,
    weight: &[f64],
    d_pre: &[f64],
    grad: &mut [f64],
    w_range: core::ops::Range<usize>,
    b_range: core::ops::Range<usize>,
    mut d_input: Option<&mut [f64]>,
) {
    let mut patch = vec![0.0; 4 * cin];
    let mut d_patch = vec![0.0; 4 * cin];
    for y in 0..out_h {
        for x in 0..out_w {
            gather_patch(input, in_w, cin, x, y, &mut patch);
            let g = &d_pre[(y * out_w + x) * cout..(y * out_w + x + 1) * cout];
            for (db, gv) in grad[b_range.clone()].iter_mut().zip(g) {
                *db += gv;
            }
            if let Some(d_in) = d_input.as_deref_mut() {
                d_patch.iter_mut().for_each(|v| *v = 0.0);
                linear_backward(weight, &patch, g, &mut grad[w_range.clone()], Some(&mut d_patch));
                for ky in 0..2 {
                    let dst = ((2 * y + ky) * in_w + 2 * x) * cin;
                    for (d, s) in d_in[dst..dst + 2 * cin].iter_mut().zip(&d_patch[ky * 2 * cin..(ky + 1) * 2 * cin]) {
                        *d += s;
                    }
                }
            } else {
                linear_backward(weight, &patch, g, &mut grad[w_range.clone()], None);
            }
        }
    }
}
