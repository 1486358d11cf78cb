//! Tabular run reports: one JSON document, rendered as JSON, CSV or text.
//!
//! Schema: `{"config": {...}, "rows": [Row, ...], "summary": {...}?}`.

use std::fmt::Write as _;

use serde::{Serialize, Serializer};
use serde_json::Value;

use crate::error::Result;
use crate::rational::{to_f64, to_fraction_string};
use crate::Rational;

pub fn serialize_fraction<S: Serializer>(r: &Rational, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&to_fraction_string(r))
}

pub const CSV_HEADER: &str = "m,ell,d,method,value,decimal,stderr,analytic,z";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
    Human,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Row {
    pub m: usize,
    pub ell: usize,
    pub d: usize,
    pub method: String,
    /// Exact fraction string or a measured number.
    pub value: Value,
    pub decimal: f64,
    pub stderr: Option<f64>,
    pub analytic: Option<String>,
    pub z: Option<f64>,
}

impl Row {
    /// Row whose value is an exact fraction.
    pub fn exact(m: usize, ell: usize, d: usize, method: impl Into<String>, value: &Rational) -> Self {
        Self {
            m,
            ell,
            d,
            method: method.into(),
            value: Value::String(to_fraction_string(value)),
            decimal: to_f64(value),
            stderr: None,
            analytic: None,
            z: None,
        }
    }

    /// Row whose value is a measurement, optionally compared to an exact target.
    pub fn measured(
        m: usize,
        ell: usize,
        d: usize,
        method: impl Into<String>,
        value: f64,
        stderr: Option<f64>,
        analytic: Option<&Rational>,
    ) -> Self {
        let z = match (analytic, stderr) {
            (Some(a), Some(se)) => z_score(value, to_f64(a), se),
            _ => None,
        };
        Self {
            m,
            ell,
            d,
            method: method.into(),
            value: number(value),
            decimal: value,
            stderr,
            analytic: analytic.map(to_fraction_string),
            z,
        }
    }
}

/// `(value - target) / stderr`; zero-variance measurements score 0 on an
/// exact hit and are unscored otherwise.
pub fn z_score(value: f64, target: f64, stderr: f64) -> Option<f64> {
    if stderr > 0.0 {
        Some((value - target) / stderr)
    } else if value == target {
        Some(0.0)
    } else {
        None
    }
}

fn number(x: f64) -> Value {
    serde_json::Number::from_f64(x).map_or(Value::Null, Value::Number)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub config: Value,
    pub rows: Vec<Row>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub summary: Option<Value>,
}

impl Report {
    pub fn new(config: Value) -> Self {
        Self { config, rows: Vec::new(), summary: None }
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let value = match &r.value {
                Value::String(s) => s.clone(),
                v => v.to_string(),
            };
            let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                r.m,
                r.ell,
                r.d,
                r.method,
                value,
                r.decimal,
                opt(r.stderr),
                r.analytic.as_deref().unwrap_or(""),
                opt(r.z)
            );
        }
        out
    }

    /// Plain-text rendering of the JSON document.
    pub fn to_human(&self) -> Result<String> {
        let doc = serde_json::to_value(self)?;
        let mut out = String::new();
        if let Some(cfg) = doc.get("config").and_then(Value::as_object) {
            let _ = writeln!(out, "config:");
            for (k, v) in cfg {
                let _ = writeln!(out, "  {k} = {v}");
            }
        }
        let cell = |v: &Value| match v {
            Value::Null => "-".to_string(),
            Value::String(s) => s.clone(),
            Value::Number(n) => match n.as_f64() {
                Some(x) if n.is_f64() => format!("{x:.6}"),
                _ => n.to_string(),
            },
            other => other.to_string(),
        };
        let cols = ["m", "ell", "d", "method", "value", "decimal", "stderr", "analytic", "z"];
        let rows: Vec<Vec<String>> = doc["rows"]
            .as_array()
            .map(|rs| rs.iter().map(|r| cols.iter().map(|c| cell(&r[*c])).collect()).collect())
            .unwrap_or_default();
        let widths: Vec<usize> = cols
            .iter()
            .enumerate()
            .map(|(i, c)| rows.iter().map(|r| r[i].len()).chain([c.len()]).max().unwrap_or(0))
            .collect();
        let line = |fields: Vec<&str>| {
            fields
                .iter()
                .zip(&widths)
                .map(|(f, w)| format!("{f:<w$}"))
                .collect::<Vec<_>>()
                .join("  ")
                .trim_end()
                .to_string()
        };
        let _ = writeln!(out, "{}", line(cols.to_vec()));
        for r in &rows {
            let _ = writeln!(out, "{}", line(r.iter().map(String::as_str).collect()));
        }
        if let Some(summary) = doc.get("summary").and_then(Value::as_object) {
            let _ = writeln!(out, "summary:");
            for (k, v) in summary {
                let _ = writeln!(out, "  {k} = {v}");
            }
        }
        Ok(out)
    }

    pub fn render(&self, format: Format) -> Result<String> {
        match format {
            Format::Json => self.to_json(),
            Format::Csv => Ok(self.to_csv()),
            Format::Human => self.to_human(),
        }
    }
}
