use std::path::Path;

use pressense_core::nn::{EpochMetrics, ModelConfig, ModelParams, TrainConfig, TrainOutcome};
use pressense_core::synth::{SplitPlan, SynthConfig};
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::jsonl::{self, Versioned};

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedArray {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

/// Trained model parameters together with the configuration that produced
/// them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub train: TrainConfig,
    pub synth: SynthConfig,
    pub split: SplitPlan,
    pub params: Vec<NamedArray>,
    pub history: Vec<EpochMetrics>,
}

const FIELDS: &[&str] = &["train", "synth", "split", "params", "history"];

impl Checkpoint {
    pub fn new(outcome: &TrainOutcome, train: TrainConfig, synth: SynthConfig, split: SplitPlan) -> Self {
        let params = outcome
            .params
            .named_arrays()
            .into_iter()
            .map(|(name, shape, values)| NamedArray { name: name.into(), shape, values: values.to_vec() })
            .collect();
        Self { train, synth, split, params, history: outcome.history.clone() }
    }

    pub fn model_config(&self) -> &ModelConfig {
        &self.train.model
    }

    pub fn params(&self) -> Result<ModelParams> {
        let arrays: Vec<(String, Vec<f64>)> = self.params.iter().map(|a| (a.name.clone(), a.values.clone())).collect();
        Ok(ModelParams::from_named(&self.train.model, &arrays)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        jsonl::write_document(path, &Versioned { version: CHECKPOINT_VERSION, inner: self })
    }

    pub fn load(path: &Path) -> Result<Self> {
        jsonl::read_document(path, CHECKPOINT_VERSION, FIELDS)
    }
}
