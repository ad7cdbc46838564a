//! JSON wire messages exchanged over `/session`.

use pressense_core::touch::{EngineEvent, KeyLayout};
use pressense_core::PressureImage;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Key events against the layout, with a transcript after each Enter.
    #[default]
    Keyboard,
    /// Touch and stroke events only; the layout is ignored.
    Drawing,
    /// Every engine event, keys included when a layout is set.
    RawEvents,
}

/// A layout given by name (see `GET /layouts`) or inline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LayoutRef {
    Name(String),
    Inline(KeyLayout),
}

impl Default for LayoutRef {
    fn default() -> Self {
        LayoutRef::Name("qwerty".into())
    }
}

fn default_frame_rate() -> f64 {
    15.0
}
fn default_debounce() -> u32 {
    2
}
fn default_threshold() -> f64 {
    pressense_core::CONTACT_THRESHOLD_KPA
}
fn default_width() -> usize {
    185
}
fn default_height() -> usize {
    105
}
fn default_touch_sigma() -> f64 {
    3.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionConfig {
    pub session: String,
    #[serde(default = "default_frame_rate")]
    pub frame_rate_hz: f64,
    #[serde(default)]
    pub layout: LayoutRef,
    #[serde(default = "default_debounce")]
    pub debounce_frames: u32,
    #[serde(default = "default_threshold")]
    pub threshold_kpa: f64,
    #[serde(default)]
    pub mode: Mode,
    /// Grid size of every frame in the session.
    #[serde(default = "default_width")]
    pub width: usize,
    #[serde(default = "default_height")]
    pub height: usize,
    /// Blob size used to render sparse touch lists.
    #[serde(default = "default_touch_sigma")]
    pub touch_sigma_px: f64,
    /// Sentence that typed text is scored against.
    #[serde(default)]
    pub reference: String,
}

/// A touch from a client that does not send full grids.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SparseTouch {
    pub x: f64,
    pub y: f64,
    pub pressure_kpa: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameMessage {
    pub session: String,
    pub timestamp: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pressure: Option<PressureImage>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub touches: Option<Vec<SparseTouch>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventsMessage {
    pub session: String,
    /// Zero-based index of the frame these events belong to.
    pub frame: u64,
    pub timestamp: f64,
    pub events: Vec<EngineEvent>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptMessage {
    pub session: String,
    pub reference: String,
    pub typed: String,
    pub elapsed_s: f64,
    pub characters: usize,
    pub errors: usize,
    pub wpm: f64,
    pub net_wpm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    /// Not valid JSON; the connection is closed after this message.
    Parse,
    /// Valid JSON that breaks the protocol (unknown type, frame before config, ...).
    Protocol,
    /// A config or frame with invalid values.
    Invalid,
    /// The session cannot continue as configured (e.g. frame size changed).
    Session,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorMessage {
    pub session: String,
    pub code: ErrorCode,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AckMessage {
    pub session: String,
    pub layout: Option<String>,
    pub mode: Mode,
    pub width: usize,
    pub height: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum WireMessage {
    Config(SessionConfig),
    Frame(FrameMessage),
    Events(EventsMessage),
    Transcript(TranscriptMessage),
    Error(ErrorMessage),
    Ack(AckMessage),
}

impl WireMessage {
    pub fn session(&self) -> &str {
        match self {
            WireMessage::Config(m) => &m.session,
            WireMessage::Frame(m) => &m.session,
            WireMessage::Events(m) => &m.session,
            WireMessage::Transcript(m) => &m.session,
            WireMessage::Error(m) => &m.session,
            WireMessage::Ack(m) => &m.session,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("wire messages serialize")
    }
}
