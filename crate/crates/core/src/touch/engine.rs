use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::layout::{hit_test, KeyLayout};
use crate::error::{Error, Result};
use crate::geometry::{find_peaks, TouchPoint};
use crate::pressure::PressureImage;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EngineConfig {
    /// Consecutive frames needed to confirm an onset or a termination.
    pub debounce_frames: u32,
    pub threshold_kpa: f64,
    pub association_radius_px: f64,
    pub min_peak_distance_px: f64,
    pub width_min_px: f64,
    pub width_max_px: f64,
    /// Pressure at which stroke width saturates.
    pub width_pressure_max_kpa: f64,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            debounce_frames: 2,
            threshold_kpa: crate::CONTACT_THRESHOLD_KPA,
            association_radius_px: 15.0,
            min_peak_distance_px: 4.0,
            width_min_px: 1.0,
            width_max_px: 12.0,
            width_pressure_max_kpa: 30.0,
        }
    }
}

impl EngineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.debounce_frames == 0 {
            return Err(Error::invalid("debounce_frames must be at least 1"));
        }
        if !(self.threshold_kpa > 0.0 && self.threshold_kpa.is_finite()) {
            return Err(Error::invalid("threshold must be positive"));
        }
        if !(self.association_radius_px > 0.0) {
            return Err(Error::invalid("association radius must be positive"));
        }
        if !(self.min_peak_distance_px >= 1.0) {
            return Err(Error::invalid("minimum peak distance must be at least 1 px"));
        }
        if !(self.width_min_px > 0.0 && self.width_max_px >= self.width_min_px && self.width_max_px.is_finite()) {
            return Err(Error::invalid("stroke widths must satisfy 0 < min <= max"));
        }
        if !(self.width_pressure_max_kpa > self.threshold_kpa) {
            return Err(Error::invalid("width saturation pressure must exceed the threshold"));
        }
        Ok(())
    }

    /// Stroke width for a peak pressure: linear from the threshold to the
    /// saturation pressure, clamped to `[width_min_px, width_max_px]`.
    pub fn width_map(&self, pressure_kpa: f64) -> f64 {
        let t = (pressure_kpa - self.threshold_kpa) / (self.width_pressure_max_kpa - self.threshold_kpa);
        let t = if t.is_nan() { 0.0 } else { t.clamp(0.0, 1.0) };
        self.width_min_px + t * (self.width_max_px - self.width_min_px)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransitionKind {
    Down,
    Up,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "state", content = "count", rename_all = "snake_case")]
pub enum TrackPhase {
    PendingDown(u32),
    Down,
    PendingUp(u32),
}

/// Confirmed onset or termination of a contact track.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TouchEvent {
    pub kind: TransitionKind,
    pub track: u64,
    pub frame: u64,
    pub x: f64,
    pub y: f64,
    pub pressure: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeyEvent {
    pub kind: TransitionKind,
    pub key: String,
    pub frame: u64,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrokeSample {
    pub track: u64,
    pub frame: u64,
    pub x: f64,
    pub y: f64,
    pub width: f64,
    pub pressure: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum EngineEvent {
    Touch(TouchEvent),
    Key(KeyEvent),
    Stroke(StrokeSample),
}

impl EngineEvent {
    pub fn as_key(&self) -> Option<&KeyEvent> {
        match self {
            EngineEvent::Key(k) => Some(k),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Track {
    id: u64,
    phase: TrackPhase,
    x: f64,
    y: f64,
    pressure: f64,
    onset_frame: u64,
    /// Key under the track at key-down, held until key-up.
    key: Option<String>,
}

/// Per-session touch tracking state. Plain data; one caller at a time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineState {
    config: EngineConfig,
    tracks: Vec<Track>,
    next_track: u64,
    frame: u64,
    dims: Option<(usize, usize)>,
}

impl EngineState {
    pub fn new(config: EngineConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self { config, tracks: Vec::new(), next_track: 0, frame: 0, dims: None })
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    /// Frames processed so far; the next frame gets this index.
    pub fn frame_index(&self) -> u64 {
        self.frame
    }

    pub fn phases(&self) -> impl Iterator<Item = (u64, TrackPhase)> + '_ {
        self.tracks.iter().map(|t| (t.id, t.phase))
    }

    /// Detects peaks in `frame`, advances every track's debounce machine and
    /// returns this frame's events in track order.
    pub fn step_frame(&mut self, frame: &PressureImage, layout: Option<&KeyLayout>) -> Result<Vec<EngineEvent>> {
        let dims = (frame.width(), frame.height());
        match self.dims {
            Some(d) if d != dims => {
                return Err(Error::Session(format!(
                    "frame is {}x{} but the session started at {}x{}",
                    dims.0, dims.1, d.0, d.1
                )))
            }
            _ => self.dims = Some(dims),
        }
        let points = find_peaks(frame, self.config.threshold_kpa, self.config.min_peak_distance_px)?;
        let matches = self.associate(&points);
        let index = self.frame;
        let debounce = self.config.debounce_frames;
        let mut events = Vec::new();
        let mut survivors = Vec::with_capacity(self.tracks.len());

        for (mut track, matched) in core::mem::take(&mut self.tracks).into_iter().zip(matches.track_to_point) {
            if let Some(pi) = matched {
                let p = &points[pi];
                track.x = p.x;
                track.y = p.y;
                track.pressure = p.peak_pressure;
            }
            let keep = match (track.phase, matched.is_some()) {
                (TrackPhase::PendingDown(n), true) => {
                    if n + 1 >= debounce {
                        self.press(&mut track, index, layout, &mut events);
                    } else {
                        track.phase = TrackPhase::PendingDown(n + 1);
                    }
                    true
                }
                (TrackPhase::PendingDown(_), false) => false,
                (TrackPhase::Down | TrackPhase::PendingUp(_), true) => {
                    track.phase = TrackPhase::Down;
                    self.stroke(&track, index, &mut events);
                    true
                }
                (TrackPhase::Down, false) => self.absent(&mut track, 0, index, &mut events),
                (TrackPhase::PendingUp(n), false) => self.absent(&mut track, n, index, &mut events),
            };
            if keep {
                survivors.push(track);
            }
        }

        for (pi, p) in points.iter().enumerate() {
            if matches.point_taken[pi] {
                continue;
            }
            let mut track = Track {
                id: self.next_track,
                phase: TrackPhase::PendingDown(1),
                x: p.x,
                y: p.y,
                pressure: p.peak_pressure,
                onset_frame: index,
                key: None,
            };
            self.next_track += 1;
            if debounce == 1 {
                self.press(&mut track, index, layout, &mut events);
            }
            survivors.push(track);
        }

        self.tracks = survivors;
        self.frame += 1;
        Ok(events)
    }

    fn press(&self, track: &mut Track, frame: u64, layout: Option<&KeyLayout>, events: &mut Vec<EngineEvent>) {
        track.phase = TrackPhase::Down;
        events.push(EngineEvent::Touch(TouchEvent {
            kind: TransitionKind::Down,
            track: track.id,
            frame,
            x: track.x,
            y: track.y,
            pressure: track.pressure,
        }));
        track.key = layout.and_then(|l| hit_test((track.x, track.y), l)).map(String::from);
        if let Some(key) = &track.key {
            events.push(EngineEvent::Key(KeyEvent { kind: TransitionKind::Down, key: key.clone(), frame, x: track.x, y: track.y }));
        }
        self.stroke(track, frame, events);
    }

    fn stroke(&self, track: &Track, frame: u64, events: &mut Vec<EngineEvent>) {
        events.push(EngineEvent::Stroke(StrokeSample {
            track: track.id,
            frame,
            x: track.x,
            y: track.y,
            width: self.config.width_map(track.pressure),
            pressure: track.pressure,
        }));
    }

    /// A down track missed this frame after `missed` earlier misses.
    /// Returns whether the track lives on.
    fn absent(&self, track: &mut Track, missed: u32, frame: u64, events: &mut Vec<EngineEvent>) -> bool {
        if missed + 1 < self.config.debounce_frames {
            track.phase = TrackPhase::PendingUp(missed + 1);
            return true;
        }
        events.push(EngineEvent::Touch(TouchEvent {
            kind: TransitionKind::Up,
            track: track.id,
            frame,
            x: track.x,
            y: track.y,
            pressure: 0.0,
        }));
        if let Some(key) = track.key.take() {
            events.push(EngineEvent::Key(KeyEvent { kind: TransitionKind::Up, key, frame, x: track.x, y: track.y }));
        }
        false
    }

    /// Greedy nearest-neighbour matching within the association radius,
    /// pairs ordered by (distance, track id, point index).
    fn associate(&self, points: &[TouchPoint]) -> Matches {
        let r2 = self.config.association_radius_px * self.config.association_radius_px;
        let mut pairs = Vec::new();
        for (ti, t) in self.tracks.iter().enumerate() {
            for (pi, p) in points.iter().enumerate() {
                let d2 = (t.x - p.x) * (t.x - p.x) + (t.y - p.y) * (t.y - p.y);
                if d2 <= r2 {
                    pairs.push((d2, t.id, ti, pi));
                }
            }
        }
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.3.cmp(&b.3)));
        let mut track_to_point = alloc::vec![None; self.tracks.len()];
        let mut point_taken = alloc::vec![false; points.len()];
        for (_, _, ti, pi) in pairs {
            if track_to_point[ti].is_none() && !point_taken[pi] {
                track_to_point[ti] = Some(pi);
                point_taken[pi] = true;
            }
        }
        Matches { track_to_point, point_taken }
    }
}

struct Matches {
    track_to_point: Vec<Option<usize>>,
    point_taken: Vec<bool>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::touch::{Key, Rect};
    use alloc::vec;

    fn frame(on: bool, at: &[(usize, usize)]) -> PressureImage {
        let mut data = vec![0.0; 40 * 20];
        if on {
            for &(x, y) in at {
                data[y * 40 + x] = 5.0;
            }
        }
        PressureImage::new(40, 20, data).unwrap()
    }

    fn downs_and_ups(seq: &[u8]) -> (Vec<u64>, Vec<u64>) {
        let mut st = EngineState::new(EngineConfig::default()).unwrap();
        let (mut downs, mut ups) = (Vec::new(), Vec::new());
        for &s in seq {
            for e in st.step_frame(&frame(s == 1, &[(10, 10)]), None).unwrap() {
                if let EngineEvent::Touch(t) = e {
                    match t.kind {
                        TransitionKind::Down => downs.push(t.frame),
                        TransitionKind::Up => ups.push(t.frame),
                    }
                }
            }
        }
        (downs, ups)
    }

    #[test]
    fn worked_debounce_sequence() {
        assert_eq!(downs_and_ups(&[0, 1, 1, 1, 0, 1, 0, 0]), (vec![2], vec![7]));
    }

    #[test]
    fn single_frame_spike_is_ignored() {
        assert_eq!(downs_and_ups(&[0, 1, 0]), (vec![], vec![]));
    }

    #[test]
    fn two_touches_on_two_keys() {
        let layout = KeyLayout::new(
            "pair",
            vec![
                Key { label: "a".into(), rect: Rect { x: 0.0, y: 0.0, w: 20.0, h: 20.0 } },
                Key { label: "b".into(), rect: Rect { x: 20.0, y: 0.0, w: 20.0, h: 20.0 } },
            ],
        )
        .unwrap();
        let mut st = EngineState::new(EngineConfig::default()).unwrap();
        let mut keys = Vec::new();
        for _ in 0..3 {
            for e in st.step_frame(&frame(true, &[(5, 10), (32, 10)]), Some(&layout)).unwrap() {
                if let Some(k) = e.as_key() {
                    keys.push((k.key.clone(), k.frame));
                }
            }
        }
        assert_eq!(keys, vec![("a".into(), 1), ("b".into(), 1)]);
    }

    #[test]
    fn dimension_change_is_a_session_error() {
        let mut st = EngineState::new(EngineConfig::default()).unwrap();
        st.step_frame(&frame(false, &[]), None).unwrap();
        let other = PressureImage::zeros(8, 8);
        assert!(matches!(st.step_frame(&other, None), Err(Error::Session(_))));
    }

    #[test]
    fn width_map_clamps() {
        let c = EngineConfig::default();
        assert_eq!(c.width_map(0.0), c.width_min_px);
        assert_eq!(c.width_map(100.0), c.width_max_px);
        assert!(c.width_map(10.0) > c.width_map(5.0));
    }
}
