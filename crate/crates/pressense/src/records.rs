//! Session record and prediction files (line-delimited JSON).

use std::io::{BufRead, Write};
use std::path::Path;

use pressense_core::synth::SessionRecord;
use pressense_core::{ContactLabel, PressureImage};
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::jsonl;

pub const RECORDS_VERSION: u32 = 1;

const RECORD_FIELDS: &[&str] =
    &["session_id", "participant_id", "frame_index", "timestamp", "domain", "contact_label", "pressure", "prompt"];

/// A model's estimate for one recorded frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub session_id: String,
    pub frame_index: u64,
    pub pressure: PressureImage,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contact_label: Option<ContactLabel>,
}

const PREDICTION_FIELDS: &[&str] = &["session_id", "frame_index", "pressure", "contact_label"];

pub fn write_records<'a>(w: impl Write, records: impl IntoIterator<Item = &'a SessionRecord>) -> std::io::Result<()> {
    jsonl::write_lines(w, RECORDS_VERSION, records)
}

/// Parses and validates records; errors name the offending line.
pub fn read_records(r: impl BufRead, source_name: &str) -> Result<Vec<SessionRecord>> {
    let records: Vec<SessionRecord> = jsonl::read_lines(r, source_name, RECORDS_VERSION, RECORD_FIELDS)?;
    validate(&records, source_name)?;
    Ok(records)
}

pub fn write_records_file<'a>(path: &Path, records: impl IntoIterator<Item = &'a SessionRecord>) -> Result<()> {
    jsonl::write_lines_file(path, RECORDS_VERSION, records)
}

pub fn read_records_file(path: &Path) -> Result<Vec<SessionRecord>> {
    let records: Vec<SessionRecord> = jsonl::read_lines_file(path, RECORDS_VERSION, RECORD_FIELDS)?;
    validate(&records, &path.display().to_string())?;
    Ok(records)
}

fn validate(records: &[SessionRecord], source_name: &str) -> Result<()> {
    for (i, r) in records.iter().enumerate() {
        r.validate().map_err(|e| crate::Error::Parse { source_name: source_name.into(), line: i + 1, message: e.to_string() })?;
    }
    Ok(())
}

pub fn write_predictions_file<'a>(path: &Path, predictions: impl IntoIterator<Item = &'a Prediction>) -> Result<()> {
    jsonl::write_lines_file(path, RECORDS_VERSION, predictions)
}

pub fn read_predictions_file(path: &Path) -> Result<Vec<Prediction>> {
    jsonl::read_lines_file(path, RECORDS_VERSION, PREDICTION_FIELDS)
}

pub fn read_predictions(r: impl BufRead, source_name: &str) -> Result<Vec<Prediction>> {
    jsonl::read_lines(r, source_name, RECORDS_VERSION, PREDICTION_FIELDS)
}
