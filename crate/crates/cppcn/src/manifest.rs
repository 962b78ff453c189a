//! JSON dataset manifests.

use std::fs;
use std::path::Path;

use cppcn_core::popsim::DatasetManifest;
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result, ResultExt};

/// Pretty JSON with a trailing newline. Floats use shortest round-trip
/// formatting, so `to_string(from_str(s)) == s` for any string this produced.
pub fn to_json_string<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("plain data serialises");
    s.push('\n');
    s
}

/// JSON-pointer rendering of a serde path (`/samples/3/split`).
pub(crate) fn pointer(path: &serde_path_to_error::Path) -> String {
    use serde_path_to_error::Segment;
    let mut out = String::new();
    for seg in path.iter() {
        out.push('/');
        match seg {
            Segment::Seq { index } => out.push_str(&index.to_string()),
            Segment::Map { key } => out.push_str(&key.replace('~', "~0").replace('/', "~1")),
            Segment::Enum { variant } => out.push_str(variant),
            Segment::Unknown => out.push('?'),
        }
    }
    if out.is_empty() {
        out.push('/');
    }
    out
}

/// Deserialize JSON; syntax errors carry `line:column`, schema errors a
/// JSON pointer to the offending value.
pub fn from_json_str<T: DeserializeOwned>(text: &str, path: &Path) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    match serde_path_to_error::deserialize(de) {
        Ok(v) => Ok(v),
        Err(e) => {
            let inner = e.inner();
            if inner.is_syntax() || inner.is_eof() {
                let loc = format!("line {} column {}", inner.line(), inner.column());
                Err(Error::parse(path, loc, strip_position(&inner.to_string())))
            } else {
                let loc = pointer(e.path());
                Err(Error::parse(path, loc, strip_position(&inner.to_string())))
            }
        }
    }
}

// serde_json appends " at line L column C"; the location is reported separately.
fn strip_position(msg: &str) -> String {
    match msg.rfind(" at line ") {
        Some(i) => msg[..i].to_string(),
        None => msg.to_string(),
    }
}

pub fn parse_manifest(text: &str, path: &Path) -> Result<DatasetManifest> {
    let m: DatasetManifest = from_json_str(text, path)?;
    m.validate().map_err(|e| Error::data(path, e))?;
    Ok(m)
}

pub fn load_manifest(path: &Path) -> Result<DatasetManifest> {
    let text = fs::read_to_string(path).at(path)?;
    parse_manifest(&text, path)
}

pub fn save_manifest(path: &Path, m: &DatasetManifest) -> Result<()> {
    fs::write(path, to_json_string(m)).at(path)
}
