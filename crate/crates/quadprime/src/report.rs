//! Structured, machine-readable reports.
//!
//! Every CLI subcommand emits one JSON document built through [`Report`]:
//! keys are sorted (serde_json's default map is a BTreeMap, so canonical
//! serialization is automatic), every numeric field is validated finite,
//! and each document is stamped with the tool version and a hash of the
//! effective configuration. `runtime_ms` is the single field excluded
//! from determinism comparisons; [`determinism_view`] strips it.

use crate::{Error, Result};
use num_complex::Complex64;
use serde_json::{Map, Number, Value};

pub const SCHEMA_ID: &str = "quadprime-report/1";

/// Builder for one report document.
#[derive(Debug, Clone)]
pub struct Report {
    fields: Map<String, Value>,
}

impl Report {
    pub fn new(command: &str) -> Self {
        let mut fields = Map::new();
        fields.insert("schema".into(), Value::String(SCHEMA_ID.into()));
        fields.insert(
            "version".into(),
            Value::String(env!("CARGO_PKG_VERSION").into()),
        );
        fields.insert("command".into(), Value::String(command.into()));
        Self { fields }
    }

    pub fn set_str(&mut self, key: &str, v: &str) -> &mut Self {
        self.fields.insert(key.into(), Value::String(v.into()));
        self
    }

    pub fn set_bool(&mut self, key: &str, v: bool) -> &mut Self {
        self.fields.insert(key.into(), Value::Bool(v));
        self
    }

    pub fn set_int(&mut self, key: &str, v: i64) -> &mut Self {
        self.fields.insert(key.into(), Value::Number(v.into()));
        self
    }

    pub fn set_uint(&mut self, key: &str, v: u64) -> &mut Self {
        self.fields.insert(key.into(), Value::Number(v.into()));
        self
    }

    /// Insert a float; non-finite values are a domain error (the schema
    /// requires every numeric field finite).
    pub fn set_num(&mut self, key: &str, v: f64) -> Result<&mut Self> {
        if !v.is_finite() {
            return Err(Error::Domain(format!(
                "report field {key} is not finite: {v}"
            )));
        }
        let num = Number::from_f64(v)
            .ok_or_else(|| Error::Domain(format!("report field {key}: bad float {v}")))?;
        self.fields.insert(key.into(), Value::Number(num));
        Ok(self)
    }

    /// Insert a complex value as `{key}_re` / `{key}_im`.
    pub fn set_complex(&mut self, key: &str, v: Complex64) -> Result<&mut Self> {
        self.set_num(&format!("{key}_re"), v.re)?;
        self.set_num(&format!("{key}_im"), v.im)?;
        Ok(self)
    }

    pub fn set_value(&mut self, key: &str, v: Value) -> Result<&mut Self> {
        validate_finite(&v)
            .map_err(|msg| Error::Domain(format!("report field {key}: {msg}")))?;
        self.fields.insert(key.into(), v);
        Ok(self)
    }

    /// Stamp provenance: thread count, config hash, runtime.
    pub fn stamp(&mut self, threads: usize, config_hash: &str, runtime_ms: u64) -> Result<()> {
        self.set_uint("threads", threads as u64);
        self.set_str("config_hash", config_hash);
        self.set_uint("runtime_ms", runtime_ms);
        Ok(())
    }

    /// Canonical JSON (sorted keys, pretty-printed, trailing newline).
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(&Value::Object(self.fields.clone()))
            .map_err(|e| Error::Domain(format!("serialization failed: {e}")))?;
        s.push('\n');
        Ok(s)
    }

    /// Lossy CSV projection: top-level scalar fields only, one header row
    /// and one value row.
    pub fn to_csv(&self) -> String {
        let mut headers = Vec::new();
        let mut row = Vec::new();
        for (k, v) in &self.fields {
            let cell = match v {
                Value::Null => String::new(),
                Value::Bool(b) => b.to_string(),
                Value::Number(n) => n.to_string(),
                Value::String(s) => s.replace(',', ";"),
                Value::Array(_) | Value::Object(_) => continue,
            };
            headers.push(k.clone());
            row.push(cell);
        }
        format!("{}\n{}\n", headers.join(","), row.join(","))
    }

    pub fn fields(&self) -> &Map<String, Value> {
        &self.fields
    }
}

fn validate_finite(v: &Value) -> std::result::Result<(), String> {
    match v {
        Value::Number(n) => {
            if let Some(f) = n.as_f64() {
                if !f.is_finite() {
                    return Err(format!("non-finite number {f}"));
                }
            }
            Ok(())
        }
        Value::Array(a) => a.iter().try_for_each(validate_finite),
        Value::Object(o) => o.values().try_for_each(validate_finite),
        _ => Ok(()),
    }
}

/// FNV-1a hash of the effective configuration, as stamped into reports.
pub fn config_hash(pairs: &[(String, String)]) -> String {
    let mut sorted: Vec<&(String, String)> = pairs.iter().collect();
    sorted.sort();
    let mut h: u64 = 0xcbf29ce484222325;
    for (k, v) in sorted {
        for b in k.bytes().chain([b'='].into_iter()).chain(v.bytes()).chain([b'\n']) {
            h ^= b as u64;
            h = h.wrapping_mul(0x100000001b3);
        }
    }
    format!("{h:016x}")
}

/// The document with every `runtime_ms` field removed: the view compared
/// for byte-identity across thread counts.
pub fn determinism_view(json: &str) -> Result<String> {
    let mut v: Value = serde_json::from_str(json)
        .map_err(|e| Error::Domain(format!("invalid report JSON: {e}")))?;
    strip_runtime(&mut v);
    let mut s = serde_json::to_string_pretty(&v)
        .map_err(|e| Error::Domain(format!("serialization failed: {e}")))?;
    s.push('\n');
    Ok(s)
}

fn strip_runtime(v: &mut Value) {
    match v {
        Value::Object(o) => {
            o.remove("runtime_ms");
            o.values_mut().for_each(strip_runtime);
        }
        Value::Array(a) => a.iter_mut().for_each(strip_runtime),
        _ => {}
    }
}

/// Parse the line-oriented `key=value` configuration grammar: one pair
/// per line, `#` starts a comment, blank lines ignored, later keys
/// override earlier ones.
pub fn parse_config(text: &str) -> Result<Vec<(String, String)>> {
    let mut out: Vec<(String, String)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(Error::Domain(format!(
                "config line {}: expected key=value, got {raw:?}",
                i + 1
            )));
        };
        let (k, v) = (k.trim().to_string(), v.trim().to_string());
        if k.is_empty() {
            return Err(Error::Domain(format!("config line {}: empty key", i + 1)));
        }
        out.retain(|(k2, _)| k2 != &k);
        out.push((k, v));
    }
    Ok(out)
}
