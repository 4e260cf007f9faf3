//! Canonical JSON: sorted keys, fixed float formatting with 17
//! significant digits, 2-space indent, trailing newline. Identical data
//! always serializes to identical bytes, so golden tests and re-run
//! comparisons work at the byte level.

use serde::Serialize;
use serde_json::Value;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CanonicalError {
    #[error("serialization failed: {0}")]
    Serde(#[from] serde_json::Error),
    #[error("non-finite float cannot be serialized canonically")]
    NonFinite,
}

/// 17 significant digits in scientific notation; round-trips every f64.
pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

fn write_value(out: &mut String, value: &Value, indent: usize) -> Result<(), CanonicalError> {
    match value {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if let Some(u) = n.as_u64() {
                out.push_str(&u.to_string());
            } else if let Some(i) = n.as_i64() {
                out.push_str(&i.to_string());
            } else {
                let f = n.as_f64().ok_or(CanonicalError::NonFinite)?;
                if !f.is_finite() {
                    return Err(CanonicalError::NonFinite);
                }
                out.push_str(&fmt_float(f));
            }
        }
        Value::String(s) => {
            out.push_str(&serde_json::to_string(s)?);
        }
        Value::Array(items) => {
            if items.is_empty() {
                out.push_str("[]");
                return Ok(());
            }
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push('\n');
                out.push_str(&"  ".repeat(indent + 1));
                write_value(out, item, indent + 1)?;
            }
            out.push('\n');
            out.push_str(&"  ".repeat(indent));
            out.push(']');
        }
        Value::Object(map) => {
            if map.is_empty() {
                out.push_str("{}");
                return Ok(());
            }
            out.push('{');
            // serde_json's default map is a BTreeMap, so iteration is
            // already key-sorted.
            for (i, (key, item)) in map.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push('\n');
                out.push_str(&"  ".repeat(indent + 1));
                out.push_str(&serde_json::to_string(key)?);
                out.push_str(": ");
                write_value(out, item, indent + 1)?;
            }
            out.push('\n');
            out.push_str(&"  ".repeat(indent));
            out.push('}');
        }
    }
    Ok(())
}

pub fn to_canonical_json<T: Serialize>(value: &T) -> Result<String, CanonicalError> {
    let value = serde_json::to_value(value)?;
    let mut out = String::new();
    write_value(&mut out, &value, 0)?;
    out.push('\n');
    Ok(out)
}

pub fn write_canonical_json<T: Serialize>(
    path: &std::path::Path,
    value: &T,
) -> Result<(), std::io::Error> {
    let text = to_canonical_json(value)
        .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))?;
    std::fs::write(path, text)
}
