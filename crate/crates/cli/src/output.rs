use std::io::Write;
use std::path::Path;

use serde::Serialize;
use serde_json::{Map, Value};

/// One output row; keys keep insertion order.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Record(pub Map<String, Value>);

impl Record {
    pub fn new(experiment: &str) -> Self {
        let mut m = Map::new();
        m.insert("experiment".into(), Value::from(experiment));
        Record(m)
    }

    pub fn put(mut self, key: &str, v: impl Into<Value>) -> Self {
        self.0.insert(key.into(), v.into());
        self
    }

    pub fn set(&mut self, key: &str, v: impl Into<Value>) {
        self.0.insert(key.into(), v.into());
    }

    /// Finite floats as numbers; NaN and infinities as strings.
    pub fn float(self, key: &str, x: f64) -> Self {
        self.put(key, float_value(x))
    }

    /// Appends every field of `other` that is not already present.
    pub fn extend(mut self, other: &Record) -> Self {
        for (k, v) in &other.0 {
            self.0.entry(k.clone()).or_insert_with(|| v.clone());
        }
        self
    }
}

pub fn float_value(x: f64) -> Value {
    serde_json::Number::from_f64(x).map_or_else(|| Value::from(x.to_string()), Value::Number)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    /// `--format` wins; otherwise the extension of `out`, defaulting to CSV.
    pub fn resolve(flag: Option<Format>, out: Option<&Path>) -> Format {
        flag.unwrap_or_else(|| match out.and_then(|p| p.extension()).and_then(|e| e.to_str()) {
            Some("json") => Format::Json,
            _ => Format::Csv,
        })
    }
}

fn cell(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// Header from the union of keys in first-seen order; missing cells are empty.
pub fn to_csv(records: &[Record]) -> std::io::Result<Vec<u8>> {
    let mut header: Vec<&String> = Vec::new();
    for r in records {
        for k in r.0.keys() {
            if !header.contains(&k) {
                header.push(k);
            }
        }
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header.iter().map(|s| s.as_str()))?;
    for r in records {
        w.write_record(header.iter().map(|k| r.0.get(k.as_str()).map(cell).unwrap_or_default()))?;
    }
    w.into_inner().map_err(|e| e.into_error())
}

pub fn to_json<T: Serialize>(value: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(value).expect("records serialize");
    out.push(b'\n');
    out
}

pub fn render(records: &[Record], format: Format) -> std::io::Result<Vec<u8>> {
    match format {
        Format::Csv => to_csv(records),
        Format::Json => Ok(to_json(&records)),
    }
}

/// Writes to `out`, or stdout when absent.
pub fn emit(bytes: &[u8], out: Option<&Path>) -> std::io::Result<()> {
    match out {
        Some(path) => {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            std::fs::write(path, bytes)
        }
        None => std::io::stdout().lock().write_all(bytes),
    }
}
