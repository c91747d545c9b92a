//! Structural validation of JSON inputs with JSON-pointer error locations.

use serde_json::{Map, Value};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{pointer}: {message}")]
pub struct SchemaError {
    /// RFC 6901 pointer to the offending value (`""` is the document root).
    pub pointer: String,
    pub message: String,
}

impl SchemaError {
    pub fn new(pointer: impl Into<String>, message: impl Into<String>) -> Self {
        Self { pointer: pointer.into(), message: message.into() }
    }
}

pub(crate) fn parse(text: &str) -> Result<Value, SchemaError> {
    serde_json::from_str(text).map_err(|e| SchemaError::new("", format!("invalid JSON: {e}")))
}

/// Appends one reference token, escaping `~` and `/`.
pub(crate) fn child(pointer: &str, token: impl std::fmt::Display) -> String {
    let token = token.to_string().replace('~', "~0").replace('/', "~1");
    format!("{pointer}/{token}")
}

pub(crate) fn object<'a>(v: &'a Value, pointer: &str) -> Result<&'a Map<String, Value>, SchemaError> {
    v.as_object().ok_or_else(|| SchemaError::new(pointer, "expected an object"))
}

pub(crate) fn array<'a>(v: &'a Value, pointer: &str) -> Result<&'a Vec<Value>, SchemaError> {
    v.as_array().ok_or_else(|| SchemaError::new(pointer, "expected an array"))
}

pub(crate) fn field<'a>(obj: &'a Map<String, Value>, key: &str, pointer: &str) -> Result<&'a Value, SchemaError> {
    obj.get(key).ok_or_else(|| SchemaError::new(child(pointer, key), "missing required field"))
}

pub(crate) fn index(v: &Value, pointer: &str) -> Result<usize, SchemaError> {
    v.as_u64()
        .and_then(|u| usize::try_from(u).ok())
        .ok_or_else(|| SchemaError::new(pointer, "expected a non-negative integer"))
}

pub(crate) fn number(v: &Value, pointer: &str) -> Result<f64, SchemaError> {
    v.as_f64().filter(|x| x.is_finite()).ok_or_else(|| SchemaError::new(pointer, "expected a finite number"))
}
