//! Suite configs: JSON files plus `--set key.path=value` overrides.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::CliError;

/// Run options shared by every suite, under the `run` key.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub out: Option<PathBuf>,
}

/// Every suite config has a `run` block and a validation pass.
pub trait SuiteConfig: DeserializeOwned + Serialize + Default {
    fn run(&self) -> &RunOptions;
    fn run_mut(&mut self) -> &mut RunOptions;
    fn validate(&self) -> Result<(), String>;
}

fn anchored(source: &str, e: serde_json::Error) -> CliError {
    CliError::Config(format!("{source}:{}:{}: {e}", e.line(), e.column()))
}

/// Parses `src` (or defaults), then applies overrides in order.
pub fn load<C: SuiteConfig>(file: Option<&Path>, sets: &[String]) -> Result<C, CliError> {
    let (text, source) = match file {
        Some(p) => (
            std::fs::read_to_string(p).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?,
            p.display().to_string(),
        ),
        None => ("{}".to_string(), "<defaults>".to_string()),
    };
    let parsed: C = serde_json::from_str(&text).map_err(|e| anchored(&source, e))?;
    if sets.is_empty() {
        return Ok(parsed);
    }
    let mut value = serde_json::to_value(&parsed).expect("config is serializable");
    for s in sets {
        apply_set(&mut value, s)?;
    }
    serde_json::from_value(value).map_err(|e| CliError::Config(format!("--set: {e}")))
}

/// `a.b.c=json`; a value that is not valid JSON is taken as a string.
fn apply_set(root: &mut Value, assignment: &str) -> Result<(), CliError> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("--set {assignment}: expected key=value")))?;
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(CliError::Config(format!("--set {assignment}: empty key segment")));
    }
    let mut node = root;
    for p in &parts[..parts.len() - 1] {
        if !node.is_object() {
            return Err(CliError::Config(format!("--set {assignment}: `{p}` is not inside an object")));
        }
        node = node
            .as_object_mut()
            .expect("checked")
            .entry(p.to_string())
            .or_insert_with(|| Value::Object(Map::new()));
    }
    match node.as_object_mut() {
        Some(obj) => {
            obj.insert(parts[parts.len() - 1].to_string(), value);
            Ok(())
        }
        None => Err(CliError::Config(format!("--set {assignment}: parent is not an object"))),
    }
}

pub fn positive(name: &str, v: f64) -> Result<(), String> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(format!("{name} must be positive and finite, got {v}"))
    }
}

pub fn non_empty<T>(name: &str, v: &[T]) -> Result<(), String> {
    if v.is_empty() {
        Err(format!("{name} must not be empty"))
    } else {
        Ok(())
    }
}

pub fn all_positive(name: &str, v: &[f64]) -> Result<(), String> {
    non_empty(name, v)?;
    v.iter().try_for_each(|&x| positive(name, x))
}
