//! Per-frame pressure images to debounced touch, key and stroke events.

mod engine;
mod layout;
mod typing;

pub use engine::{EngineConfig, EngineEvent, EngineState, KeyEvent, StrokeSample, TouchEvent, TrackPhase, TransitionKind};
pub use layout::{hit_test, Key, KeyLayout, Rect};
pub use typing::{score_typing, transcribe, TypingResult, BACKSPACE, ENTER, SPACE};
