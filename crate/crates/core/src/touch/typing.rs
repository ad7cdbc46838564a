use alloc::string::String;

use serde::{Deserialize, Serialize};

use super::engine::{KeyEvent, TransitionKind};
use crate::error::{Error, Result};
use crate::metrics::{net_wpm, TypingScore, TypingTranscript};

pub const BACKSPACE: &str = "Backspace";
pub const SPACE: &str = "Space";
pub const ENTER: &str = "Enter";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypingResult {
    pub transcript: TypingTranscript,
    pub score: TypingScore,
}

/// Text typed by key-down events up to the first Enter, and the frame
/// indices of the first keystroke and of that Enter.
pub fn transcribe<'a>(events: impl IntoIterator<Item = &'a KeyEvent>) -> Result<(String, u64, u64)> {
    let mut typed = String::new();
    let mut first = None;
    for e in events {
        if e.kind != TransitionKind::Down {
            continue;
        }
        let first_frame = *first.get_or_insert(e.frame);
        match e.key.as_str() {
            ENTER => return Ok((typed, first_frame, e.frame)),
            BACKSPACE => {
                typed.pop();
            }
            SPACE => typed.push(' '),
            k => {
                let mut chars = k.chars();
                if let (Some(c), None) = (chars.next(), chars.next()) {
                    typed.push(c);
                }
            }
        }
    }
    Err(Error::IncompleteSession("no Enter key-down in the event stream".into()))
}

/// Reconstructs the typed sentence and scores it. Time runs from the first
/// key-down to the Enter key-down at `frame_rate_hz`.
pub fn score_typing<'a>(events: impl IntoIterator<Item = &'a KeyEvent>, reference: &str, frame_rate_hz: f64) -> Result<TypingResult> {
    if !(frame_rate_hz > 0.0 && frame_rate_hz.is_finite()) {
        return Err(Error::invalid("frame rate must be positive"));
    }
    let (typed, first, enter) = transcribe(events)?;
    let elapsed = (enter - first) as f64 / frame_rate_hz;
    let transcript = TypingTranscript::new(reference, typed, elapsed)?;
    let score = net_wpm(&transcript);
    Ok(TypingResult { transcript, score })
}
