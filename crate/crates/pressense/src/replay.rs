//! Offline replay of recorded sessions through the touch engine.

use std::collections::HashMap;

use pressense_core::metrics::{evaluate_frames, FrameEvaluation, MetricsReport};
use pressense_core::nn::Domain;
use pressense_core::synth::SessionRecord;
use pressense_core::touch::{score_typing, EngineConfig, EngineEvent, EngineState, KeyEvent, KeyLayout, TypingResult};
use serde::{Deserialize, Serialize};

use crate::calibration::Calibration;
use crate::error::{Error, Result};
use crate::records::Prediction;

pub const REPORT_VERSION: u32 = 1;

#[derive(Debug, Clone)]
pub struct ReplayOptions {
    pub engine: EngineConfig,
    pub layout: Option<KeyLayout>,
    pub calibration: Option<Calibration>,
    /// Sentence to score typed text against; defaults to each session's prompt.
    pub reference: Option<String>,
    pub frame_rate_hz: f64,
}

impl Default for ReplayOptions {
    fn default() -> Self {
        Self { engine: EngineConfig::default(), layout: None, calibration: None, reference: None, frame_rate_hz: 15.0 }
    }
}

/// Engine output for one replayed frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameEvents {
    pub session_id: String,
    pub frame_index: u64,
    pub events: Vec<EngineEvent>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EventCounts {
    pub touch: usize,
    pub key: usize,
    pub stroke: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionTranscript {
    pub session_id: String,
    #[serde(flatten)]
    pub result: TypingResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayReport {
    pub version: u32,
    pub records: usize,
    pub sessions: usize,
    /// Frames that had a pressure image to feed through the engine.
    pub engine_frames: usize,
    pub events: EventCounts,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub transcripts: Vec<SessionTranscript>,
    pub metrics: MetricsReport,
}

/// Feeds every record through a per-session engine and evaluates the
/// estimates against the recorded ground truth.
///
/// The estimate for a frame is its prediction when one is supplied,
/// otherwise the recorded pressure. Weak records carry no pressure, so they
/// need a prediction; their frames only contribute to contact accuracy.
pub fn replay(
    records: &[SessionRecord],
    predictions: Option<&[Prediction]>,
    options: &ReplayOptions,
) -> Result<(Vec<FrameEvents>, ReplayReport)> {
    if records.is_empty() {
        return Err(Error::Data("no records to replay".into()));
    }
    let predicted: HashMap<(&str, u64), &Prediction> = predictions
        .unwrap_or_default()
        .iter()
        .map(|p| ((p.session_id.as_str(), p.frame_index), p))
        .collect();

    let mut sessions: Vec<(&str, Vec<&SessionRecord>)> = Vec::new();
    let mut index: HashMap<&str, usize> = HashMap::new();
    for r in records {
        let i = *index.entry(&r.session_id).or_insert_with(|| {
            sessions.push((&r.session_id, Vec::new()));
            sessions.len() - 1
        });
        sessions[i].1.push(r);
    }

    let mut frames_out = Vec::with_capacity(records.len());
    let mut evaluations = Vec::with_capacity(records.len());
    let mut counts = EventCounts::default();
    let mut transcripts = Vec::new();
    let mut engine_frames = 0;

    for (session_id, recs) in &sessions {
        let mut engine = EngineState::new(options.engine.clone())?;
        let mut keys: Vec<KeyEvent> = Vec::new();
        for r in recs {
            let estimate = match (predicted.get(&(r.session_id.as_str(), r.frame_index)), &r.pressure) {
                (Some(p), _) => p.pressure.clone(),
                (None, Some(p)) => p.clone(),
                (None, None) => {
                    return Err(Error::Data(format!(
                        "weak record {}#{} has no prediction to replay",
                        r.session_id, r.frame_index
                    )))
                }
            };
            if let Some(truth) = &r.pressure {
                if !truth.same_shape(&estimate) {
                    return Err(Error::Data(format!("prediction for {}#{} has the wrong size", r.session_id, r.frame_index)));
                }
            }
            let surface = match &options.calibration {
                Some(c) => c.project(&estimate)?,
                None => estimate.clone(),
            };
            let events = engine.step_frame(&surface, options.layout.as_ref())?;
            engine_frames += 1;
            for e in &events {
                match e {
                    EngineEvent::Touch(_) => counts.touch += 1,
                    EngineEvent::Key(k) => {
                        counts.key += 1;
                        keys.push(k.clone());
                    }
                    EngineEvent::Stroke(_) => counts.stroke += 1,
                }
            }
            frames_out.push(FrameEvents { session_id: r.session_id.clone(), frame_index: r.frame_index, events });
            evaluations.push(FrameEvaluation {
                frame_id: evaluations.len() as u64,
                truth_label: r.contact_label,
                truth_pressure: if r.domain == Domain::Full { r.pressure.clone() } else { None },
                estimate,
                estimated_label: None,
            });
        }
        if options.layout.is_some() && keys.iter().any(|k| k.key == pressense_core::touch::ENTER) {
            let reference = options.reference.as_deref().unwrap_or(&recs[0].prompt);
            let result = score_typing(&keys, reference, options.frame_rate_hz)?;
            transcripts.push(SessionTranscript { session_id: session_id.to_string(), result });
        }
    }

    let metrics = evaluate_frames(&evaluations, options.engine.threshold_kpa)?;
    let report = ReplayReport {
        version: REPORT_VERSION,
        records: records.len(),
        sessions: sessions.len(),
        engine_frames,
        events: counts,
        transcripts,
        metrics,
    };
    Ok((frames_out, report))
}

/// Serialized report, byte-stable for identical inputs.
pub fn report_json(report: &ReplayReport) -> String {
    crate::jsonl::to_document(report)
}
