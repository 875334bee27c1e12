//! Config files: JSON with `{"$include": "relative/path.json"}` splicing.

use std::path::{Path, PathBuf};

use careflow_core::sim::SimulationConfig;
use careflow_core::staffing::CostModel;
use serde::de::DeserializeOwned;
use serde_json::Value;

use crate::error::{core_message, Error, FieldError, Result};

pub const INCLUDE_KEY: &str = "$include";

/// Replaces every `{"$include": path}` object by the parsed file, resolving
/// `path` against `base` and nested includes against the included file's
/// directory.
pub fn resolve_includes(value: Value, base: &Path) -> Result<Value> {
    resolve(value, base, &mut Vec::new())
}

fn resolve(value: Value, base: &Path, stack: &mut Vec<PathBuf>) -> Result<Value> {
    match value {
        Value::Object(map) if map.contains_key(INCLUDE_KEY) => {
            if map.len() != 1 {
                return Err(Error::config(INCLUDE_KEY, "an include object must have no other keys"));
            }
            let Some(rel) = map[INCLUDE_KEY].as_str() else {
                return Err(Error::config(INCLUDE_KEY, "include target must be a string path"));
            };
            let path = base.join(rel);
            let canon = path
                .canonicalize()
                .map_err(|e| Error::config(INCLUDE_KEY, format!("cannot open {}: {e}", path.display())))?;
            if stack.contains(&canon) {
                return Err(Error::config(INCLUDE_KEY, format!("include cycle through {}", path.display())));
            }
            let inner = read_json(&canon)?;
            stack.push(canon.clone());
            let dir = canon.parent().map(Path::to_path_buf).unwrap_or_default();
            let out = resolve(inner, &dir, stack);
            stack.pop();
            out
        }
        Value::Object(map) => Ok(Value::Object(
            map.into_iter().map(|(k, v)| Ok((k, resolve(v, base, stack)?))).collect::<Result<_>>()?,
        )),
        Value::Array(items) => Ok(Value::Array(items.into_iter().map(|v| resolve(v, base, stack)).collect::<Result<_>>()?)),
        other => Ok(other),
    }
}

fn read_json(path: &Path) -> Result<Value> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::config("", format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::config("", format!("{}: {e}", path.display())))
}

/// Deserializes with the failing field path attached to the error.
pub fn from_value<T: DeserializeOwned>(value: Value) -> Result<T> {
    serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner().to_string();
        Error::Config(vec![field_error(&path, inner)])
    })
}

fn field_error(path: &str, message: String) -> FieldError {
    let parent = if path == "." { "" } else { path };
    // serde reports a missing key at its parent; point at the key itself
    let field = match message.strip_prefix("missing field `").and_then(|m| m.split('`').next()) {
        Some(name) if parent.is_empty() => name.to_string(),
        Some(name) => format!("{parent}.{name}"),
        None => parent.to_string(),
    };
    FieldError { field, message }
}

/// Parses and validates an include-free config value, reporting every
/// failing top-level field.
pub fn parse_config(value: Value) -> Result<SimulationConfig> {
    if contains_include(&value) {
        return Err(Error::config(INCLUDE_KEY, "includes are only resolved in config files"));
    }
    let cfg: SimulationConfig = from_value(value)?;
    check(&cfg)?;
    Ok(cfg)
}

/// Runs config validation, keeping the field each failure belongs to.
pub fn check(cfg: &SimulationConfig) -> Result<()> {
    let errs: Vec<FieldError> = cfg
        .field_errors()
        .into_iter()
        .map(|(field, e)| FieldError { field: field.into(), message: core_message(&e) })
        .collect();
    if errs.is_empty() {
        Ok(())
    } else {
        Err(Error::Config(errs))
    }
}

fn contains_include(v: &Value) -> bool {
    match v {
        Value::Object(m) => m.contains_key(INCLUDE_KEY) || m.values().any(contains_include),
        Value::Array(a) => a.iter().any(contains_include),
        _ => false,
    }
}

pub fn load_config(path: &Path) -> Result<SimulationConfig> {
    let raw = read_json(path)?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    parse_config(resolve_includes(raw, &base)?)
}

/// Cost rates from a file, or the built-in placeholders.
pub fn load_cost(path: Option<&Path>) -> Result<CostModel> {
    let Some(path) = path else {
        return Ok(CostModel::default());
    };
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let cost: CostModel = from_value(resolve_includes(read_json(path)?, &base)?)?;
    cost.validate().map_err(|e| Error::config("cost", core_message(&e)))?;
    Ok(cost)
}
