//! JSONL reports and plain-text tables.
//!
//! Every report starts with a `config` record holding the effective
//! configuration as TOML. Keys starting with `wall_time` carry timings and
//! are the only values allowed to differ between two runs with the same
//! seed.

use std::fmt::Write as _;
use std::path::Path;

use serde_json::{json, Map, Value};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Report {
    pub records: Vec<Value>,
}

impl Report {
    pub fn new(command: &str, config_toml: &str) -> Self {
        Self { records: vec![json!({ "record": "config", "command": command, "config": config_toml })] }
    }

    pub fn push(&mut self, record: Value) {
        self.records.push(record);
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("json values serialize"));
            out.push('\n');
        }
        out
    }

    pub fn write(&self, path: &Path) -> std::io::Result<()> {
        std::fs::write(path, self.to_jsonl())
    }
}

/// Drops every `wall_time*` key, recursively.
pub fn strip_timing(v: &Value) -> Value {
    match v {
        Value::Object(m) => Value::Object(
            m.iter()
                .filter(|(k, _)| !k.starts_with("wall_time"))
                .map(|(k, v)| (k.clone(), strip_timing(v)))
                .collect::<Map<_, _>>(),
        ),
        Value::Array(a) => Value::Array(a.iter().map(strip_timing).collect()),
        other => other.clone(),
    }
}

/// [`strip_timing`] applied line by line to JSONL text.
pub fn strip_timing_jsonl(text: &str) -> Result<String, serde_json::Error> {
    let mut out = String::new();
    for line in text.lines() {
        let v: Value = serde_json::from_str(line)?;
        out.push_str(&serde_json::to_string(&strip_timing(&v))?);
        out.push('\n');
    }
    Ok(out)
}

/// Left-aligned text table.
#[derive(Debug, Clone, Default)]
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(headers: impl IntoIterator<Item = S>) -> Self {
        Self { headers: headers.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    pub fn row<S: Into<String>>(&mut self, cells: impl IntoIterator<Item = S>) {
        self.rows.push(cells.into_iter().map(Into::into).collect());
    }

    pub fn render(&self) -> String {
        let n = self.headers.len();
        let mut widths: Vec<usize> = self.headers.iter().map(|h| h.chars().count()).collect();
        for r in &self.rows {
            for (w, c) in widths.iter_mut().zip(r) {
                *w = (*w).max(c.chars().count());
            }
        }
        let mut out = String::new();
        let line = |out: &mut String, cells: &[String]| {
            let parts: Vec<String> = (0..n)
                .map(|i| format!("{:<w$}", cells.get(i).map_or("", String::as_str), w = widths[i]))
                .collect();
            let _ = writeln!(out, "{}", parts.join("  ").trim_end());
        };
        line(&mut out, &self.headers);
        line(&mut out, &widths.iter().map(|&w| "-".repeat(w)).collect::<Vec<_>>());
        for r in &self.rows {
            line(&mut out, r);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn timing_keys_are_masked() {
        let v = json!({ "a": 1, "wall_time_s": 0.5, "nested": [{ "wall_time_per_sample": 2, "b": true }] });
        assert_eq!(strip_timing(&v), json!({ "a": 1, "nested": [{ "b": true }] }));
    }

    #[test]
    fn first_record_is_config() {
        let mut r = Report::new("sample", "seed = 3\n");
        r.push(json!({ "record": "x" }));
        let text = r.to_jsonl();
        let first: Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
        assert_eq!(first["record"], "config");
        assert_eq!(first["config"], "seed = 3\n");
        assert_eq!(text.lines().count(), 2);
    }

    #[test]
    fn table_aligns_columns() {
        let mut t = Table::new(["n", "rate"]);
        t.row(["1", "0.5"]);
        t.row(["10", "0.25"]);
        assert_eq!(t.render(), "n   rate\n--  ----\n1   0.5\n10  0.25\n");
    }
}
