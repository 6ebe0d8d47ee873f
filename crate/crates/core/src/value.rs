//! Typed scalar values shared by the constraint language, extracted rules and
//! the evaluator.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

/// A scalar parameter value: number, text or boolean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Bool(bool),
    Number(f64),
    Text(String),
}

impl Value {
    /// Interpret a raw token: `"quoted"` is text, `true`/`false` are booleans,
    /// anything that reads as a finite decimal is a number, the rest is text.
    pub fn infer(raw: &str) -> Value {
        let raw = raw.trim();
        if let Some(inner) = strip_quotes(raw) {
            return Value::Text(inner.to_string());
        }
        match raw {
            "true" => return Value::Bool(true),
            "false" => return Value::Bool(false),
            _ => {}
        }
        match parse_decimal(raw) {
            Some(n) => Value::Number(n),
            None => Value::Text(raw.to_string()),
        }
    }

    /// Interpret a raw token in the light of a declared OpenAPI type.
    ///
    /// Numeric types get numbers when the token reads as one, `string` keeps
    /// the token as text (minus surrounding quotes), `boolean` gets booleans.
    /// Tokens that do not fit the declared type fall back to [`Value::infer`].
    pub fn coerce(raw: &str, oas_type: Option<&str>) -> Value {
        let trimmed = raw.trim();
        match oas_type {
            Some("integer") | Some("number") => {
                let unquoted = strip_quotes(trimmed).unwrap_or(trimmed);
                match parse_decimal(unquoted) {
                    Some(n) => Value::Number(n),
                    None => Value::infer(trimmed),
                }
            }
            Some("string") => Value::Text(strip_quotes(trimmed).unwrap_or(trimmed).to_string()),
            Some("boolean") => match strip_quotes(trimmed).unwrap_or(trimmed) {
                "true" => Value::Bool(true),
                "false" => Value::Bool(false),
                _ => Value::infer(trimmed),
            },
            _ => Value::infer(trimmed),
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Number(n) => Some(*n),
            _ => None,
        }
    }

    pub fn type_name(&self) -> &'static str {
        match self {
            Value::Bool(_) => "boolean",
            Value::Number(_) => "number",
            Value::Text(_) => "text",
        }
    }

    /// JSON form; integral numbers are written as integers.
    pub fn to_json(&self) -> serde_json::Value {
        match self {
            Value::Bool(b) => serde_json::Value::Bool(*b),
            Value::Number(n) => number_to_json(*n),
            Value::Text(s) => serde_json::Value::String(s.clone()),
        }
    }

    /// Read a JSON scalar. Arrays, objects and null have no scalar form.
    pub fn from_json(json: &serde_json::Value) -> Option<Value> {
        match json {
            serde_json::Value::Bool(b) => Some(Value::Bool(*b)),
            serde_json::Value::Number(n) => n.as_f64().map(Value::Number),
            serde_json::Value::String(s) => Some(Value::Text(s.clone())),
            _ => None,
        }
    }

    /// Total order used for canonical sorting: booleans, then numbers, then text.
    pub fn canonical_cmp(&self, other: &Value) -> Ordering {
        fn rank(v: &Value) -> u8 {
            match v {
                Value::Bool(_) => 0,
                Value::Number(_) => 1,
                Value::Text(_) => 2,
            }
        }
        match (self, other) {
            (Value::Bool(a), Value::Bool(b)) => a.cmp(b),
            (Value::Number(a), Value::Number(b)) => a.total_cmp(b),
            (Value::Text(a), Value::Text(b)) => a.cmp(b),
            _ => rank(self).cmp(&rank(other)),
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Bool(b) => write!(f, "{b}"),
            Value::Number(n) => write!(f, "{n}"),
            Value::Text(s) => f.write_str(s),
        }
    }
}

impl From<&str> for Value {
    fn from(s: &str) -> Self {
        Value::Text(s.to_string())
    }
}

impl From<f64> for Value {
    fn from(n: f64) -> Self {
        Value::Number(n)
    }
}

impl From<bool> for Value {
    fn from(b: bool) -> Self {
        Value::Bool(b)
    }
}

pub(crate) fn number_to_json(n: f64) -> serde_json::Value {
    if n.fract() == 0.0 && n.abs() < 9.0e15 {
        serde_json::Value::from(n as i64)
    } else {
        serde_json::Number::from_f64(n)
            .map(serde_json::Value::Number)
            .unwrap_or(serde_json::Value::Null)
    }
}

/// Parse a plain decimal literal (`12`, `-3.5`, `1e3`). Rejects the spellings
/// `str::parse::<f64>` accepts for infinities and NaN.
pub(crate) fn parse_decimal(raw: &str) -> Option<f64> {
    let body = raw.strip_prefix(['-', '+']).unwrap_or(raw);
    if !body.starts_with(|c: char| c.is_ascii_digit() || c == '.') {
        return None;
    }
    if !body
        .chars()
        .all(|c| c.is_ascii_digit() || matches!(c, '.' | 'e' | 'E' | '-' | '+'))
    {
        return None;
    }
    raw.parse::<f64>().ok().filter(|n| n.is_finite())
}

fn strip_quotes(raw: &str) -> Option<&str> {
    for q in ['"', '\''] {
        if raw.len() >= 2 && raw.starts_with(q) && raw.ends_with(q) {
            return Some(&raw[1..raw.len() - 1]);
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn infer_distinguishes_scalars() {
        assert_eq!(Value::infer("10"), Value::Number(10.0));
        assert_eq!(Value::infer("-2.5"), Value::Number(-2.5));
        assert_eq!(Value::infer("\"10\""), Value::Text("10".into()));
        assert_eq!(Value::infer("true"), Value::Bool(true));
        assert_eq!(Value::infer("ASC"), Value::Text("ASC".into()));
        assert_eq!(Value::infer("inf"), Value::Text("inf".into()));
        assert_eq!(Value::infer("NaN"), Value::Text("NaN".into()));
    }

    #[test]
    fn coerce_follows_declared_type() {
        assert_eq!(Value::coerce("5", Some("integer")), Value::Number(5.0));
        assert_eq!(Value::coerce("\"7\"", Some("integer")), Value::Number(7.0));
        assert_eq!(Value::coerce("5", Some("string")), Value::Text("5".into()));
        assert_eq!(
            Value::coerce("abc", Some("integer")),
            Value::Text("abc".into())
        );
        assert_eq!(Value::coerce("false", Some("boolean")), Value::Bool(false));
    }

    #[test]
    fn integral_numbers_serialize_as_integers() {
        assert_eq!(Value::Number(5.0).to_json(), serde_json::json!(5));
        assert_eq!(Value::Number(0.5).to_json(), serde_json::json!(0.5));
    }
}
