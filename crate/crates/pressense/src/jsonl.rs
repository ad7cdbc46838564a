//! Versioned JSON documents and line-delimited JSON streams.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

use crate::error::{Error, Result};

/// `inner`'s fields preceded by a `version` field.
#[derive(Serialize)]
pub(crate) struct Versioned<'a, T> {
    pub version: u32,
    #[serde(flatten)]
    pub inner: &'a T,
}

/// Writes each item as one JSON object per line with a leading `version`
/// field.
pub fn write_lines<'a, T: Serialize + 'a>(
    mut w: impl Write,
    version: u32,
    items: impl IntoIterator<Item = &'a T>,
) -> std::io::Result<()> {
    for item in items {
        serde_json::to_writer(&mut w, &Versioned { version, inner: item })?;
        w.write_all(b"\n")?;
    }
    w.flush()
}

/// Parses a line-delimited stream. Blank lines are skipped; fields outside
/// `known` are ignored with a warning.
pub fn read_lines<T: DeserializeOwned>(r: impl BufRead, source_name: &str, version: u32, known: &[&str]) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| parse_error(source_name, line_no, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(parse_object(&line, source_name, line_no, version, known)?);
    }
    Ok(out)
}

fn parse_object<T: DeserializeOwned>(text: &str, source_name: &str, line: usize, version: u32, known: &[&str]) -> Result<T> {
    let value = serde_json::from_str::<Value>(text).map_err(|e| parse_error(source_name, line, e))?;
    from_versioned(value, source_name, line, version, known)
}

fn from_versioned<T: DeserializeOwned>(value: Value, source_name: &str, line: usize, version: u32, known: &[&str]) -> Result<T> {
    let mut obj = match value {
        Value::Object(obj) => obj,
        _ => return Err(parse_error(source_name, line, "expected a JSON object")),
    };
    match obj.remove("version") {
        Some(Value::Number(n)) if n.as_u64() == Some(version as u64) => {}
        Some(Value::Number(n)) if n.as_u64().is_some() => {
            return Err(Error::Version { source_name: source_name.into(), found: n.as_u64().unwrap(), expected: version })
        }
        Some(_) => return Err(parse_error(source_name, line, "version must be a non-negative integer")),
        None => return Err(parse_error(source_name, line, "missing version field")),
    }
    let unknown: Vec<&String> = obj.keys().filter(|k| !known.contains(&k.as_str())).collect();
    if !unknown.is_empty() {
        log::warn!("{source_name}:{line}: ignoring unknown fields {unknown:?}");
    }
    serde_json::from_value(Value::Object(obj)).map_err(|e| parse_error(source_name, line, e))
}

fn parse_error(source_name: &str, line: usize, e: impl std::fmt::Display) -> Error {
    Error::Parse { source_name: source_name.into(), line, message: e.to_string() }
}

pub fn write_lines_file<'a, T: Serialize + 'a>(path: &Path, version: u32, items: impl IntoIterator<Item = &'a T>) -> Result<()> {
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    write_lines(BufWriter::new(f), version, items).map_err(|e| Error::io(path, e))
}

pub fn read_lines_file<T: DeserializeOwned>(path: &Path, version: u32, known: &[&str]) -> Result<Vec<T>> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    read_lines(BufReader::new(f), &path.display().to_string(), version, known)
}

/// Pretty JSON document with a trailing newline.
pub fn to_document<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("document types serialize");
    s.push('\n');
    s
}

pub fn write_document<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    std::fs::write(path, to_document(value)).map_err(|e| Error::io(path, e))
}

/// Reads a JSON document that carries a top-level `version` field.
pub fn read_document<T: DeserializeOwned>(path: &Path, version: u32, known: &[&str]) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_document(&text, &path.display().to_string(), version, known)
}

pub fn parse_document<T: DeserializeOwned>(text: &str, source_name: &str, version: u32, known: &[&str]) -> Result<T> {
    let value: Value = serde_json::from_str(text).map_err(|e| parse_error(source_name, e.line(), e))?;
    from_versioned(value, source_name, 1, version, known)
}
