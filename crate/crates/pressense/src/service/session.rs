use std::sync::Arc;

use pressense_core::touch::{score_typing, EngineConfig, EngineEvent, EngineState, KeyEvent, KeyLayout, TransitionKind, ENTER};
use pressense_core::PressureImage;
use serde_json::Value;

use super::protocol::*;
use crate::layouts::LayoutRegistry;

/// Replies to one inbound message, and whether to close the connection.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Reply {
    pub messages: Vec<WireMessage>,
    pub close: bool,
}

struct Active {
    config: SessionConfig,
    layout: Option<KeyLayout>,
    engine: EngineState,
    /// Key-downs since the last transcript.
    keys: Vec<KeyEvent>,
}

/// Protocol state of one connection, independent of the transport.
pub struct SessionHandler {
    layouts: Arc<LayoutRegistry>,
    active: Option<Active>,
}

impl SessionHandler {
    pub fn new(layouts: Arc<LayoutRegistry>) -> Self {
        Self { layouts, active: None }
    }

    pub fn handle_text(&mut self, text: &str) -> Reply {
        let value: Value = match serde_json::from_str(text) {
            Ok(v) => v,
            Err(e) => return self.malformed(&format!("malformed JSON: {e}")),
        };
        let known = ["config", "frame", "events", "transcript", "error", "ack"];
        match value.get("type").and_then(Value::as_str) {
            None => return self.error(ErrorCode::Protocol, "message has no \"type\"".into()),
            Some(t) if !known.contains(&t) => return self.error(ErrorCode::Protocol, format!("unknown message type {t:?}")),
            Some(_) => {}
        }
        match serde_json::from_value::<WireMessage>(value) {
            Ok(msg) => self.handle(msg),
            Err(e) => self.error(ErrorCode::Protocol, format!("bad message: {e}")),
        }
    }

    /// Error reply for input that is not a JSON message; closes the connection.
    pub fn malformed(&self, reason: &str) -> Reply {
        let mut r = self.error(ErrorCode::Parse, reason.into());
        r.close = true;
        r
    }

    pub fn handle(&mut self, msg: WireMessage) -> Reply {
        match msg {
            WireMessage::Config(c) => self.configure(c),
            WireMessage::Frame(f) => self.frame(f),
            other => self.error(ErrorCode::Protocol, format!("clients may not send {:?} messages", kind(&other))),
        }
    }

    fn session_name(&self) -> String {
        self.active.as_ref().map(|a| a.config.session.clone()).unwrap_or_default()
    }

    fn error(&self, code: ErrorCode, message: String) -> Reply {
        Reply {
            messages: vec![WireMessage::Error(ErrorMessage { session: self.session_name(), code, message })],
            close: false,
        }
    }

    fn configure(&mut self, c: SessionConfig) -> Reply {
        if self.active.is_some() {
            return self.error(ErrorCode::Protocol, "session is already configured".into());
        }
        if !(c.frame_rate_hz > 0.0 && c.frame_rate_hz.is_finite()) || c.width == 0 || c.height == 0 || !(c.touch_sigma_px > 0.0) {
            return self.error(ErrorCode::Invalid, "frame rate, grid size and touch size must be positive".into());
        }
        let layout = match (&c.layout, c.mode) {
            (_, Mode::Drawing) => None,
            (LayoutRef::Inline(l), _) => Some(l.clone()),
            (LayoutRef::Name(n), _) => match self.layouts.get(n) {
                Some(l) => Some(l.clone()),
                None => return self.error(ErrorCode::Invalid, format!("unknown layout {n:?}")),
            },
        };
        let engine_cfg = EngineConfig { debounce_frames: c.debounce_frames, threshold_kpa: c.threshold_kpa, ..EngineConfig::default() };
        let engine = match EngineState::new(engine_cfg) {
            Ok(e) => e,
            Err(e) => return self.error(ErrorCode::Invalid, e.to_string()),
        };
        let ack = AckMessage {
            session: c.session.clone(),
            layout: layout.as_ref().map(|l| l.name.clone()),
            mode: c.mode,
            width: c.width,
            height: c.height,
        };
        self.active = Some(Active { config: c, layout, engine, keys: Vec::new() });
        Reply { messages: vec![WireMessage::Ack(ack)], close: false }
    }

    fn frame(&mut self, f: FrameMessage) -> Reply {
        let Some(active) = self.active.as_mut() else {
            return Reply {
                messages: vec![WireMessage::Error(ErrorMessage {
                    session: f.session,
                    code: ErrorCode::Protocol,
                    message: "frame received before config".into(),
                })],
                close: false,
            };
        };
        if f.session != active.config.session {
            return self.error(ErrorCode::Protocol, format!("frame for session {:?} on this connection", f.session));
        }
        let (w, h) = (active.config.width, active.config.height);
        let grid = match (f.pressure, f.touches) {
            (Some(p), None) => p,
            (None, Some(t)) => match render_touches(&t, w, h, active.config.touch_sigma_px) {
                Ok(p) => p,
                Err(e) => return self.error(ErrorCode::Invalid, e),
            },
            _ => return self.error(ErrorCode::Invalid, "frame needs exactly one of \"pressure\" or \"touches\"".into()),
        };
        if (grid.width(), grid.height()) != (w, h) {
            return self.error(
                ErrorCode::Session,
                format!("frame is {}x{} but the session is {}x{}", grid.width(), grid.height(), w, h),
            );
        }
        let frame_index = active.engine.frame_index();
        let events = match active.engine.step_frame(&grid, active.layout.as_ref()) {
            Ok(ev) => ev,
            Err(e) => return self.error(ErrorCode::Session, e.to_string()),
        };
        let session = active.config.session.clone();
        let mut messages = Vec::with_capacity(2);
        let mut enter = false;
        for e in &events {
            if let EngineEvent::Key(k) = e {
                if k.kind == TransitionKind::Down {
                    active.keys.push(k.clone());
                    enter |= k.key == ENTER;
                }
            }
        }
        messages.push(WireMessage::Events(EventsMessage { session: session.clone(), frame: frame_index, timestamp: f.timestamp, events }));
        if enter && active.config.mode == Mode::Keyboard {
            let keys = std::mem::take(&mut active.keys);
            match score_typing(&keys, &active.config.reference, active.config.frame_rate_hz) {
                Ok(r) => messages.push(WireMessage::Transcript(TranscriptMessage {
                    session,
                    reference: r.transcript.reference,
                    typed: r.transcript.typed,
                    elapsed_s: r.transcript.elapsed_s,
                    characters: r.score.characters,
                    errors: r.score.errors,
                    wpm: r.score.wpm,
                    net_wpm: r.score.net_wpm,
                })),
                Err(e) => messages.push(WireMessage::Error(ErrorMessage {
                    session,
                    code: ErrorCode::Invalid,
                    message: format!("cannot score transcript: {e}"),
                })),
            }
        }
        Reply { messages, close: false }
    }
}

fn kind(m: &WireMessage) -> &'static str {
    match m {
        WireMessage::Config(_) => "config",
        WireMessage::Frame(_) => "frame",
        WireMessage::Events(_) => "events",
        WireMessage::Transcript(_) => "transcript",
        WireMessage::Error(_) => "error",
        WireMessage::Ack(_) => "ack",
    }
}

/// Renders each touch as an isotropic Gaussian whose peak is its pressure.
pub fn render_touches(touches: &[SparseTouch], width: usize, height: usize, sigma: f64) -> Result<PressureImage, String> {
    if touches.iter().any(|t| !(t.x.is_finite() && t.y.is_finite() && t.pressure_kpa >= 0.0 && t.pressure_kpa.is_finite())) {
        return Err("touches need finite positions and non-negative pressure".into());
    }
    let inv = 1.0 / (2.0 * sigma * sigma);
    PressureImage::from_fn(width, height, |x, y| {
        touches
            .iter()
            .map(|t| {
                let dx = x as f64 - t.x;
                let dy = y as f64 - t.y;
                t.pressure_kpa * (-(dx * dx + dy * dy) * inv).exp()
            })
            .sum()
    })
    .map_err(|e| e.to_string())
}
