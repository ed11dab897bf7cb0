//! JSON run reports: `{config, results, timings, seed}`.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::Instant;

use serde::Serialize;
use serde_json::{json, Value};

use super::IoError;

/// JSON schema for [`Report`], shipped as `schema/report.schema.json`.
pub const REPORT_SCHEMA: &str = include_str!("../../schema/report.schema.json");

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub command: String,
    pub config: BTreeMap<String, Value>,
    pub results: Value,
    pub timings: BTreeMap<String, f64>,
    pub seed: u64,
}

impl Report {
    pub fn new(command: &str, seed: u64) -> Self {
        Self { command: command.into(), config: BTreeMap::new(), results: json!({}), timings: BTreeMap::new(), seed }
    }

    pub fn config(mut self, key: &str, value: impl Serialize) -> Self {
        self.config.insert(key.into(), serde_json::to_value(value).unwrap_or(Value::Null));
        self
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn write(&self, path: &Path) -> Result<(), IoError> {
        fs::write(path, self.to_json()).map_err(|e| IoError::Fs(path.display().to_string(), e.to_string()))
    }

    /// Report with timings zeroed, for reproducibility comparisons.
    pub fn without_timings(&self) -> Value {
        let mut v = serde_json::to_value(self).expect("report serializes");
        v["timings"] = json!({});
        v
    }
}

/// Checks the structural contract of the shipped schema: required top-level
/// keys and their JSON types.
pub fn validate_report(v: &Value) -> Result<(), String> {
    let schema: Value = serde_json::from_str(REPORT_SCHEMA).map_err(|e| e.to_string())?;
    let obj = v.as_object().ok_or("report is not an object")?;
    let required = schema["required"].as_array().ok_or("schema lacks required")?;
    for key in required {
        let key = key.as_str().unwrap_or_default();
        let field = obj.get(key).ok_or_else(|| format!("missing key {key:?}"))?;
        let ty = schema["properties"][key]["type"].as_str().unwrap_or("any");
        let ok = match ty {
            "object" => field.is_object(),
            "string" => field.is_string(),
            "integer" => field.is_u64(),
            "number" => field.is_number(),
            _ => true,
        };
        if !ok {
            return Err(format!("key {key:?} should be {ty}"));
        }
    }
    if let Some(t) = obj.get("timings").and_then(Value::as_object) {
        if let Some((k, _)) = t.iter().find(|(_, x)| !x.is_number()) {
            return Err(format!("timing {k:?} is not a number"));
        }
    }
    Ok(())
}

/// Named wall-clock stopwatch feeding `Report::timings` in seconds.
pub struct Timer {
    start: Instant,
}

impl Timer {
    pub fn start() -> Self {
        Self { start: Instant::now() }
    }

    pub fn secs(&self) -> f64 {
        self.start.elapsed().as_secs_f64()
    }
}
