//! Key layout files and the set of layouts a server offers.

use std::collections::BTreeMap;
use std::path::Path;

use pressense_core::touch::KeyLayout;

use crate::error::{Error, Result};

/// The default layout as shipped in `layouts/qwerty.json`.
pub const QWERTY_JSON: &str = include_str!("../layouts/qwerty.json");

pub fn qwerty() -> KeyLayout {
    serde_json::from_str(QWERTY_JSON).expect("bundled layout parses")
}

pub fn load_layout(path: &Path) -> Result<KeyLayout> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        source_name: path.display().to_string(),
        line: e.line(),
        message: e.to_string(),
    })
}

/// Layouts by name. Always contains the bundled QWERTY layout.
#[derive(Debug, Clone)]
pub struct LayoutRegistry {
    layouts: BTreeMap<String, KeyLayout>,
}

impl Default for LayoutRegistry {
    fn default() -> Self {
        let q = qwerty();
        Self { layouts: BTreeMap::from([(q.name.clone(), q)]) }
    }
}

impl LayoutRegistry {
    /// Adds or replaces a layout under its own name.
    pub fn insert(&mut self, layout: KeyLayout) {
        self.layouts.insert(layout.name.clone(), layout);
    }

    pub fn get(&self, name: &str) -> Option<&KeyLayout> {
        self.layouts.get(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = &KeyLayout> {
        self.layouts.values()
    }
}
