//! Canonical JSON: object keys sorted, shortest round-trip float text.

use serde::Serialize;

use crate::error::Result;

/// Compact canonical encoding.
pub fn to_string<S: Serialize>(value: &S) -> Result<String> {
    // Value's map is ordered, so re-serializing through it sorts keys.
    Ok(serde_json::to_string(&serde_json::to_value(value)?)?)
}

/// Indented canonical encoding with a trailing newline.
pub fn to_string_pretty<S: Serialize>(value: &S) -> Result<String> {
    let mut s = serde_json::to_string_pretty(&serde_json::to_value(value)?)?;
    s.push('\n');
    Ok(s)
}
