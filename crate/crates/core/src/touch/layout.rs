use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Axis-aligned rectangle in surface pixels, half-open: `[x, x+w) × [y, y+h)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl Rect {
    pub fn contains(&self, px: f64, py: f64) -> bool {
        px >= self.x && px < self.x + self.w && py >= self.y && py < self.y + self.h
    }

    pub fn intersects(&self, other: &Rect) -> bool {
        self.x < other.x + other.w && other.x < self.x + self.w && self.y < other.y + other.h && other.y < self.y + self.h
    }

    pub fn center(&self) -> (f64, f64) {
        (self.x + self.w / 2.0, self.y + self.h / 2.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Key {
    pub label: String,
    #[serde(flatten)]
    pub rect: Rect,
}

impl Key {
    pub fn center(&self) -> (f64, f64) {
        self.rect.center()
    }
}

/// Non-overlapping keys with unique labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawLayout")]
pub struct KeyLayout {
    pub name: String,
    keys: Vec<Key>,
}

#[derive(Deserialize)]
struct RawLayout {
    name: String,
    keys: Vec<Key>,
}

impl TryFrom<RawLayout> for KeyLayout {
    type Error = Error;
    fn try_from(raw: RawLayout) -> Result<Self> {
        KeyLayout::new(raw.name, raw.keys)
    }
}

impl KeyLayout {
    pub fn new(name: impl Into<String>, keys: Vec<Key>) -> Result<Self> {
        for (i, a) in keys.iter().enumerate() {
            if !(a.rect.w > 0.0 && a.rect.h > 0.0) {
                return Err(Error::invalid(alloc::format!("key {:?} has an empty rectangle", a.label)));
            }
            for b in &keys[i + 1..] {
                if a.label == b.label {
                    return Err(Error::invalid(alloc::format!("duplicate key label {:?}", a.label)));
                }
                if a.rect.intersects(&b.rect) {
                    return Err(Error::invalid(alloc::format!("keys {:?} and {:?} overlap", a.label, b.label)));
                }
            }
        }
        Ok(Self { name: name.into(), keys })
    }

    pub fn keys(&self) -> &[Key] {
        &self.keys
    }

    pub fn key(&self, label: &str) -> Option<&Key> {
        self.keys.iter().find(|k| k.label == label)
    }

    /// QWERTY letters plus Backspace, Space and Enter, sized for the
    /// 185×105 sensor grid.
    pub fn qwerty() -> Self {
        const KW: f64 = 17.0;
        const KH: f64 = 20.0;
        let rows: [(&str, f64); 3] = [("qwertyuiop", 7.0), ("asdfghjkl", 15.5), ("zxcvbnm", 24.0)];
        let mut keys = Vec::new();
        for (r, (letters, offset)) in rows.iter().enumerate() {
            let y = 8.0 + r as f64 * KH;
            for (i, ch) in letters.chars().enumerate() {
                keys.push(Key { label: ch.into(), rect: Rect { x: offset + i as f64 * KW, y, w: KW, h: KH } });
            }
        }
        let y2 = 8.0 + 2.0 * KH;
        keys.push(Key { label: "Backspace".into(), rect: Rect { x: 24.0 + 7.0 * KW, y: y2, w: 2.0 * KW, h: KH } });
        let y3 = 8.0 + 3.0 * KH;
        keys.push(Key { label: ",".into(), rect: Rect { x: 24.0, y: y3, w: KW, h: KH } });
        keys.push(Key { label: "Space".into(), rect: Rect { x: 24.0 + KW, y: y3, w: 5.0 * KW, h: KH } });
        keys.push(Key { label: ".".into(), rect: Rect { x: 24.0 + 6.0 * KW, y: y3, w: KW, h: KH } });
        keys.push(Key { label: "Enter".into(), rect: Rect { x: 24.0 + 7.0 * KW, y: y3, w: 2.0 * KW, h: KH } });
        Self::new("qwerty", keys).expect("built-in layout is valid")
    }
}

/// Label of the key whose rectangle contains the point.
pub fn hit_test(point: (f64, f64), layout: &KeyLayout) -> Option<&str> {
    layout.keys.iter().find(|k| k.rect.contains(point.0, point.1)).map(|k| k.label.as_str())
}
