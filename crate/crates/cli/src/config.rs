//! Experiment configuration: a flat `key = value` file (or a JSON object)
//! checked against a per-experiment schema.
//!
//! Flat format, one entry per line:
//!
//! ```text
//! # comment
//! k0 = 5
//! dy_sweep = 0.5, 0.25, 20
//! t = auto
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde_json::{json, Map};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Kind {
    Num,
    Int,
    /// Comma-separated numbers.
    List,
    /// A number, or the word `auto`.
    NumOrAuto,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Rule {
    Finite,
    Positive,
    NonNegative,
}

#[derive(Debug, Clone, Copy)]
pub struct Param {
    pub key: &'static str,
    pub kind: Kind,
    pub rule: Rule,
    pub default: &'static str,
    pub doc: &'static str,
}

pub const fn num(key: &'static str, default: &'static str, rule: Rule, doc: &'static str) -> Param {
    Param {
        key,
        kind: Kind::Num,
        rule,
        default,
        doc,
    }
}

pub const fn int(key: &'static str, default: &'static str, doc: &'static str) -> Param {
    Param {
        key,
        kind: Kind::Int,
        rule: Rule::Positive,
        default,
        doc,
    }
}

pub const fn list(
    key: &'static str,
    default: &'static str,
    rule: Rule,
    doc: &'static str,
) -> Param {
    Param {
        key,
        kind: Kind::List,
        rule,
        default,
        doc,
    }
}

pub const fn auto(key: &'static str, rule: Rule, doc: &'static str) -> Param {
    Param {
        key,
        kind: Kind::NumOrAuto,
        rule,
        default: "auto",
        doc,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Num(f64),
    Int(i64),
    List(Vec<f64>),
    Auto,
}

impl Value {
    fn to_json(&self) -> serde_json::Value {
        match self {
            Value::Num(v) => json!(v),
            Value::Int(v) => json!(v),
            Value::List(v) => json!(v),
            Value::Auto => json!("auto"),
        }
    }
}

/// A problem with one key, or with the configuration as a whole.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub key: Option<String>,
    pub message: String,
}

impl ConfigError {
    pub fn key(key: &str, message: impl Into<String>) -> Self {
        ConfigError {
            key: Some(key.to_string()),
            message: message.into(),
        }
    }

    pub fn general(message: impl Into<String>) -> Self {
        ConfigError {
            key: None,
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.key {
            Some(k) => write!(f, "`{k}`: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

/// Raw `(key, text)` entries in file order.
pub type Entries = Vec<(String, String)>;

pub fn read_file(path: &Path) -> Result<Entries, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError::general(format!("cannot read {}: {e}", path.display())))?;
    let is_json =
        path.extension().is_some_and(|e| e == "json") || text.trim_start().starts_with('{');
    if is_json {
        parse_json(&text)
    } else {
        parse_flat(&text)
    }
}

pub fn parse_flat(text: &str) -> Result<Entries, ConfigError> {
    let mut out = Entries::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = split_assignment(line).ok_or_else(|| {
            ConfigError::general(format!("line {}: expected `key = value`", n + 1))
        })?;
        out.push((k, v));
    }
    Ok(out)
}

pub fn parse_json(text: &str) -> Result<Entries, ConfigError> {
    let value: serde_json::Value = serde_json::from_str(text)
        .map_err(|e| ConfigError::general(format!("invalid JSON: {e}")))?;
    let obj = value
        .as_object()
        .ok_or_else(|| ConfigError::general("JSON config must be an object"))?;
    let mut out = Entries::new();
    for (k, v) in obj {
        let text = match v {
            serde_json::Value::Number(n) => n.to_string(),
            serde_json::Value::String(s) => s.clone(),
            serde_json::Value::Array(items) => {
                let parts: Option<Vec<String>> = items
                    .iter()
                    .map(|i| i.as_f64().map(|x| format!("{x:?}")))
                    .collect();
                parts
                    .ok_or_else(|| ConfigError::key(k, "arrays must contain only numbers"))?
                    .join(",")
            }
            _ => {
                return Err(ConfigError::key(
                    k,
                    "expected a number, string or array of numbers",
                ))
            }
        };
        out.push((k.clone(), text));
    }
    Ok(out)
}

pub fn split_assignment(s: &str) -> Option<(String, String)> {
    let (k, v) = s.split_once('=')?;
    let k = k.trim();
    if k.is_empty() {
        return None;
    }
    Some((k.to_string(), v.trim().to_string()))
}

fn parse_value(p: &Param, text: &str) -> Result<Value, String> {
    let number = |s: &str| -> Result<f64, String> {
        let v: f64 = s
            .trim()
            .parse()
            .map_err(|_| format!("`{}` is not a number", s.trim()))?;
        match p.rule {
            _ if !v.is_finite() => Err("must be finite".into()),
            Rule::Positive if v <= 0.0 => Err(format!("must be positive, got {v}")),
            Rule::NonNegative if v < 0.0 => Err(format!("must be non-negative, got {v}")),
            _ => Ok(v),
        }
    };
    match p.kind {
        Kind::Num => number(text).map(Value::Num),
        Kind::NumOrAuto if text.trim() == "auto" => Ok(Value::Auto),
        Kind::NumOrAuto => number(text).map(Value::Num),
        Kind::Int => {
            let v: i64 = text
                .trim()
                .parse()
                .map_err(|_| format!("`{}` is not an integer", text.trim()))?;
            if v <= 0 {
                return Err(format!("must be a positive integer, got {v}"));
            }
            Ok(Value::Int(v))
        }
        Kind::List => {
            let items: Vec<&str> = text
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .collect();
            if items.is_empty() {
                return Err("list is empty".into());
            }
            items
                .into_iter()
                .map(number)
                .collect::<Result<Vec<_>, _>>()
                .map(Value::List)
        }
    }
}

/// A configuration with every schema key resolved.
#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    values: BTreeMap<&'static str, Value>,
}

impl Config {
    /// Defaults, then `entries`, then `overrides`. Collects every error.
    pub fn resolve(
        schema: &[Param],
        entries: &Entries,
        overrides: &Entries,
    ) -> Result<Config, Vec<ConfigError>> {
        let mut errors = Vec::new();
        let mut values = BTreeMap::new();
        for p in schema {
            let v = parse_value(p, p.default)
                .unwrap_or_else(|e| panic!("bad default for {}: {e}", p.key));
            values.insert(p.key, v);
        }
        let mut seen = Vec::new();
        for (source, list) in [("config", entries), ("override", overrides)] {
            for (k, text) in list {
                let Some(p) = schema.iter().find(|p| p.key == k) else {
                    errors.push(ConfigError::key(k, "unknown key"));
                    continue;
                };
                if source == "config" {
                    if seen.contains(k) {
                        errors.push(ConfigError::key(k, "given twice"));
                        continue;
                    }
                    seen.push(k.clone());
                }
                match parse_value(p, text) {
                    Ok(v) => {
                        values.insert(p.key, v);
                    }
                    Err(e) => errors.push(ConfigError::key(k, e)),
                }
            }
        }
        if errors.is_empty() {
            Ok(Config { values })
        } else {
            Err(errors)
        }
    }

    fn get(&self, key: &str) -> &Value {
        self.values
            .get(key)
            .unwrap_or_else(|| panic!("`{key}` is not in the schema"))
    }

    pub fn num(&self, key: &str) -> f64 {
        match self.get(key) {
            Value::Num(v) => *v,
            Value::Int(v) => *v as f64,
            other => panic!("`{key}` is not a number: {other:?}"),
        }
    }

    pub fn int(&self, key: &str) -> usize {
        match self.get(key) {
            Value::Int(v) => *v as usize,
            other => panic!("`{key}` is not an integer: {other:?}"),
        }
    }

    pub fn list(&self, key: &str) -> &[f64] {
        match self.get(key) {
            Value::List(v) => v,
            other => panic!("`{key}` is not a list: {other:?}"),
        }
    }

    /// `None` for `auto`.
    pub fn maybe(&self, key: &str) -> Option<f64> {
        match self.get(key) {
            Value::Auto => None,
            _ => Some(self.num(key)),
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        let map: Map<String, serde_json::Value> = self
            .values
            .iter()
            .map(|(k, v)| (k.to_string(), v.to_json()))
            .collect();
        serde_json::Value::Object(map)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SCHEMA: &[Param] = &[
        num("dy", "5", Rule::Positive, "clock spread"),
        int("bins", "400", "histogram bins"),
        list("sweep", "1, 2", Rule::Positive, "values"),
        auto("t", Rule::Positive, "readout time"),
    ];

    fn entries(pairs: &[(&str, &str)]) -> Entries {
        pairs
            .iter()
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect()
    }

    #[test]
    fn defaults_then_file_then_overrides() {
        let cfg = Config::resolve(
            SCHEMA,
            &entries(&[("dy", "2"), ("t", "7")]),
            &entries(&[("dy", "3")]),
        )
        .unwrap();
        assert_eq!(cfg.num("dy"), 3.0);
        assert_eq!(cfg.maybe("t"), Some(7.0));
        assert_eq!(cfg.int("bins"), 400);
        assert_eq!(cfg.list("sweep"), &[1.0, 2.0]);
    }

    #[test]
    fn errors_name_every_bad_key() {
        let errs = Config::resolve(
            SCHEMA,
            &entries(&[("dy", "-1"), ("colour", "red"), ("bins", "2.5")]),
            &Entries::new(),
        )
        .unwrap_err();
        let keys: Vec<_> = errs.iter().map(|e| e.key.clone().unwrap()).collect();
        assert_eq!(keys, ["dy", "colour", "bins"]);
    }

    #[test]
    fn flat_and_json_agree() {
        let flat = parse_flat("# clock\ndy = 0.5  # small\nsweep = 1,2.5\n\nt = auto\n").unwrap();
        let json = parse_json(r#"{"dy": 0.5, "sweep": [1, 2.5], "t": "auto"}"#).unwrap();
        let a = Config::resolve(SCHEMA, &flat, &Entries::new()).unwrap();
        let b = Config::resolve(SCHEMA, &json, &Entries::new()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.maybe("t"), None);
    }

    #[test]
    fn malformed_lines_are_rejected() {
        assert!(parse_flat("dy 5").is_err());
        assert!(parse_json("[1, 2]").is_err());
        assert!(Config::resolve(
            SCHEMA,
            &entries(&[("dy", "1"), ("dy", "2")]),
            &Entries::new()
        )
        .is_err());
    }
}
