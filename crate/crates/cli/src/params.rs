//! Parameter records assembled from defaults, a JSON config file, `--set` pairs and flags.

use serde::de::DeserializeOwned;
use serde_json::{Map, Value};

use crate::error::{invalid, CliError};

#[derive(Debug, Clone, Default)]
pub struct Params {
    map: Map<String, Value>,
}

impl Params {
    pub fn from_map(map: Map<String, Value>) -> Self {
        Self { map }
    }

    /// Later values win.
    pub fn overlay(&mut self, other: Params) {
        self.map.extend(other.map);
    }

    pub fn insert(&mut self, key: &str, value: Value) {
        self.map.insert(key.to_string(), value);
    }

    pub fn set_opt<T: Into<Value>>(&mut self, key: &str, value: Option<T>) {
        if let Some(v) = value {
            self.insert(key, v.into());
        }
    }

    pub fn set_flag(&mut self, key: &str, on: bool) {
        if on {
            self.insert(key, Value::Bool(true));
        }
    }

    pub fn contains(&self, key: &str) -> bool {
        self.map.contains_key(key)
    }

    pub fn raw(&self, key: &str) -> Option<&Value> {
        self.map.get(key)
    }

    pub fn get<T: DeserializeOwned>(&self, key: &str) -> Result<Option<T>, CliError> {
        match self.map.get(key) {
            None | Some(Value::Null) => Ok(None),
            Some(v) => serde_json::from_value(v.clone())
                .map(Some)
                .map_err(|e| invalid(format!("parameter {key}: {e}"))),
        }
    }

    pub fn get_or<T: DeserializeOwned>(&self, key: &str, default: T) -> Result<T, CliError> {
        Ok(self.get(key)?.unwrap_or(default))
    }

    /// Rejects keys outside `allowed`.
    pub fn check_keys(&self, experiment: &str, allowed: &[&str]) -> Result<(), CliError> {
        for key in self.map.keys() {
            if !allowed.contains(&key.as_str()) {
                return Err(invalid(format!(
                    "unknown parameter {key} for {experiment} (expected one of: {})",
                    allowed.join(", ")
                )));
            }
        }
        Ok(())
    }
}

/// Parses `key=value`; the value is read as JSON when it parses, else as a string.
pub fn parse_assignment(text: &str) -> Result<(String, Value), CliError> {
    let (key, value) = text
        .split_once('=')
        .ok_or_else(|| invalid(format!("expected key=value, got {text}")))?;
    let key = key.trim().replace('-', "_");
    if key.is_empty() {
        return Err(invalid(format!("empty key in {text}")));
    }
    let value = serde_json::from_str(value.trim()).unwrap_or_else(|_| Value::String(value.trim().into()));
    Ok((key, value))
}

/// Grid of values: `a,b,c` or `start:stop:step` (inclusive of `stop` up to rounding).
pub fn parse_grid(text: &str) -> Result<Vec<f64>, CliError> {
    let text = text.trim();
    if text.is_empty() {
        return Err(invalid("grid is empty"));
    }
    let num = |s: &str| {
        s.trim()
            .parse::<f64>()
            .ok()
            .filter(|x| x.is_finite())
            .ok_or_else(|| invalid(format!("bad grid value {s:?}")))
    };
    if text.contains(':') {
        let parts: Vec<&str> = text.split(':').collect();
        let [start, stop, step] = parts[..] else {
            return Err(invalid(format!("range grid must be start:stop:step, got {text}")));
        };
        let (start, stop, step) = (num(start)?, num(stop)?, num(step)?);
        if !(step > 0.0) || stop < start {
            return Err(invalid(format!("range grid {text} needs step > 0 and stop >= start")));
        }
        let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
        if count > 1_000_000 {
            return Err(invalid(format!("range grid {text} has too many points")));
        }
        return Ok((0..count).map(|i| start + step * i as f64).collect());
    }
    text.split(',').map(num).collect()
}

/// Reads a grid parameter that may be given as a number, a list or a grid string.
pub fn grid_param(params: &Params, key: &str, default: &str) -> Result<Vec<f64>, CliError> {
    match params.raw(key) {
        None | Some(Value::Null) => parse_grid(default),
        Some(Value::Number(n)) => Ok(vec![n.as_f64().unwrap_or(f64::NAN)]),
        Some(Value::String(s)) => parse_grid(s),
        Some(Value::Array(_)) => {
            let v: Vec<f64> = params.get(key)?.unwrap_or_default();
            if v.is_empty() {
                return Err(invalid(format!("grid {key} is empty")));
            }
            Ok(v)
        }
        Some(other) => Err(invalid(format!("parameter {key}: cannot read a grid from {other}"))),
    }
}
