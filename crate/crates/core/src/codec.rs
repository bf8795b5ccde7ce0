//! JSON payload encoding shared by the bundle and certificate formats.
//!
//! Values are written as binary32 hex strings (`"0x3F800000"`). On input, hex
//! strings are exact, while decimal strings and JSON numbers are rounded to
//! nearest binary32.

use serde_json::Value;

use crate::ieee32::B32;
use crate::scalar::{fp32_round, RoundingMode};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{path}: {detail}")]
pub struct FormatError {
    pub path: String,
    pub detail: String,
}

pub fn ferr(path: &str, detail: impl Into<String>) -> FormatError {
    FormatError {
        path: path.to_string(),
        detail: detail.into(),
    }
}

/// Snaps `x` to the nearest binary32 value; `-0` becomes `+0`.
pub fn canonical(x: f64) -> f64 {
    let r = fp32_round(x, RoundingMode::NearestEven);
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

/// Directed snap used for bounds: `down` rounds toward `-inf`.
pub fn canonical_directed(x: f64, down: bool) -> f64 {
    let mode = if down {
        RoundingMode::TowardNegInf
    } else {
        RoundingMode::TowardPosInf
    };
    let r = fp32_round(x, mode);
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

/// Hex encoding of a value already on the binary32 grid.
pub fn to_hex(x: f64) -> String {
    B32::from_real(canonical(x), RoundingMode::NearestEven).to_hex()
}

pub fn to_decimal(x: f64) -> String {
    B32::from_real(canonical(x), RoundingMode::NearestEven).to_decimal()
}

pub fn hex_array(xs: &[f64]) -> Value {
    Value::Array(xs.iter().map(|&x| Value::String(to_hex(x))).collect())
}

pub fn decimal_array(xs: &[f64]) -> Value {
    Value::Array(xs.iter().map(|&x| Value::String(to_decimal(x))).collect())
}

/// Parses one float payload and snaps it to the grid.
pub fn parse_value(v: &Value, path: &str) -> Result<f64, FormatError> {
    let x = match v {
        Value::String(s) => {
            let b: B32 = s.parse().map_err(|e| ferr(path, format!("{e}")))?;
            if b.is_nan() {
                return Err(ferr(path, "NaN payloads are not allowed"));
            }
            b.to_f64()
        }
        Value::Number(n) => n
            .as_f64()
            .ok_or_else(|| ferr(path, "number out of range"))?,
        _ => return Err(ferr(path, "expected a float string or number")),
    };
    Ok(canonical(x))
}

pub fn parse_array(v: &Value, path: &str) -> Result<Vec<f64>, FormatError> {
    let arr = v
        .as_array()
        .ok_or_else(|| ferr(path, "expected an array"))?;
    arr.iter()
        .enumerate()
        .map(|(i, x)| parse_value(x, &format!("{path}[{i}]")))
        .collect()
}

pub fn object<'a>(
    v: &'a Value,
    path: &str,
) -> Result<&'a serde_json::Map<String, Value>, FormatError> {
    v.as_object()
        .ok_or_else(|| ferr(path, "expected an object"))
}

pub fn field<'a>(
    obj: &'a serde_json::Map<String, Value>,
    key: &str,
    path: &str,
) -> Result<&'a Value, FormatError> {
    obj.get(key)
        .ok_or_else(|| ferr(path, format!("missing field `{key}`")))
}

pub fn string(v: &Value, path: &str) -> Result<String, FormatError> {
    v.as_str()
        .map(str::to_string)
        .ok_or_else(|| ferr(path, "expected a string"))
}

pub fn index(v: &Value, path: &str) -> Result<usize, FormatError> {
    v.as_u64()
        .map(|n| n as usize)
        .ok_or_else(|| ferr(path, "expected a non-negative integer"))
}

pub fn index_array(v: &Value, path: &str) -> Result<Vec<usize>, FormatError> {
    let arr = v
        .as_array()
        .ok_or_else(|| ferr(path, "expected an array"))?;
    arr.iter()
        .enumerate()
        .map(|(i, x)| index(x, &format!("{path}[{i}]")))
        .collect()
}

/// Parses a JSON object key as a node id.
pub fn node_key(k: &str, path: &str) -> Result<usize, FormatError> {
    k.parse()
        .map_err(|_| ferr(path, format!("`{k}` is not a node id")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn hex_and_decimal_inputs() {
        assert_eq!(parse_value(&json!("0x3F800000"), "w").unwrap(), 1.0);
        assert_eq!(parse_value(&json!("0.1"), "w").unwrap(), 0.1f32 as f64);
        assert_eq!(parse_value(&json!(0.1), "w").unwrap(), 0.1f32 as f64);
        assert_eq!(parse_value(&json!("0x80000000"), "w").unwrap().to_bits(), 0);
        assert!(parse_value(&json!("0x7FC00000"), "w").is_err());
        assert!(parse_value(&json!("abc"), "w").is_err());
        assert_eq!(to_hex(1.0), "0x3F800000");
        assert_eq!(to_hex(f64::NEG_INFINITY), "0xFF800000");
    }
}
