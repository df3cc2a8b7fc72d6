//! Machine-readable experiment reports: named pass/fail checks, a parameter
//! echo, free-form results and CSV tables, written as `report.json` plus
//! one CSV file per table.

use std::fs;
use std::path::Path;

use serde::Serialize;
use serde_json::{json, Value};

use crate::error::Result;
use crate::numerics::round_sig;

/// One assertion: `value` compared with `bound` (`value <= bound` unless
/// stated otherwise in `note`).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub bound: f64,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl Check {
    pub fn at_most(name: &str, value: f64, bound: f64) -> Self {
        Check {
            name: name.to_string(),
            value,
            bound,
            pass: value <= bound,
            note: None,
        }
    }

    /// `|value − expected| ≤ tol`; the reported value is the deviation.
    pub fn near(name: &str, value: f64, expected: f64, tol: f64) -> Self {
        Check::at_most(name, (value - expected).abs(), tol).with_note(format!("value {value}, expected {expected}"))
    }

    /// `|value − expected| ≤ rel·|expected|`; the reported value is the
    /// relative deviation.
    pub fn relative(name: &str, value: f64, expected: f64, rel: f64) -> Self {
        let dev = (value - expected).abs() / expected.abs().max(f64::MIN_POSITIVE);
        Check::at_most(name, dev, rel).with_note(format!("value {value}, expected {expected}"))
    }

    pub fn holds(name: &str, pass: bool) -> Self {
        Check {
            name: name.to_string(),
            value: if pass { 1.0 } else { 0.0 },
            bound: 1.0,
            pass,
            note: None,
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }
}

#[derive(Debug, Clone, Default)]
pub struct Report {
    pub command: String,
    pub parameters: Value,
    pub results: Value,
    pub checks: Vec<Check>,
    /// `(file stem, CSV text)`.
    pub tables: Vec<(String, String)>,
}

impl Report {
    pub fn new(command: &str, parameters: Value) -> Self {
        Report {
            command: command.to_string(),
            parameters,
            results: json!({}),
            ..Default::default()
        }
    }

    pub fn check(&mut self, c: Check) {
        self.checks.push(c);
    }

    /// Stores `value` under `key` in the results object.
    pub fn result(&mut self, key: &str, value: impl Serialize) {
        let v = serde_json::to_value(value).unwrap_or(Value::Null);
        if let Value::Object(m) = &mut self.results {
            m.insert(key.to_string(), v);
        }
    }

    pub fn table(&mut self, stem: &str, csv: String) {
        self.tables.push((stem.to_string(), csv));
    }

    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.pass)
    }

    /// The report as JSON with every float rounded to 12 significant digits.
    pub fn to_json(&self) -> Value {
        round_floats(json!({
            "command": self.command,
            "version": env!("CARGO_PKG_VERSION"),
            "pass": self.pass(),
            "parameters": self.parameters,
            "checks": self.checks,
            "results": self.results,
            "tables": self.tables.iter().map(|(s, _)| format!("{s}.csv")).collect::<Vec<_>>(),
        }))
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let text = serde_json::to_string_pretty(&self.to_json())?;
        fs::write(dir.join("report.json"), text + "\n")?;
        for (stem, csv) in &self.tables {
            fs::write(dir.join(format!("{stem}.csv")), csv)?;
        }
        Ok(())
    }
}

/// Rounds every float in `v` to 12 significant digits. Integers and
/// non-finite values (already `null`) pass through.
pub fn round_floats(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => n
            .as_f64()
            .and_then(|x| serde_json::Number::from_f64(round_sig(x)))
            .map_or(Value::Null, Value::Number),
        Value::Array(a) => Value::Array(a.into_iter().map(round_floats).collect()),
        Value::Object(m) => Value::Object(m.into_iter().map(|(k, x)| (k, round_floats(x))).collect()),
        other => other,
    }
}
