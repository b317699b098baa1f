//! Certification reports: one record per check, merged by concatenation.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    /// The check could not be decided at the configured resolution.
    Inconclusive,
}

impl Status {
    pub fn from_pass(pass: bool) -> Self {
        if pass {
            Status::Pass
        } else {
            Status::Fail
        }
    }
}

/// One certified property.
///
/// `margin` is the signed slack of the property (non-negative when it
/// holds); `value` is the headline quantity of the check when it has one
/// (a fitted constant, a residual, a ratio).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckRecord {
    pub id: String,
    pub anchor: String,
    pub params: BTreeMap<String, String>,
    pub margin: f64,
    pub value: Option<f64>,
    pub status: Status,
    pub witness: BTreeMap<String, f64>,
    pub note: Option<String>,
}

impl CheckRecord {
    pub fn new(
        id: impl Into<String>,
        anchor: impl Into<String>,
        margin: f64,
        status: Status,
    ) -> Self {
        Self {
            id: id.into(),
            anchor: anchor.into(),
            params: BTreeMap::new(),
            margin,
            value: None,
            status,
            witness: BTreeMap::new(),
            note: None,
        }
    }

    pub fn param(mut self, key: &str, value: impl ToString) -> Self {
        self.params.insert(key.to_string(), value.to_string());
        self
    }

    pub fn param_f64(self, key: &str, value: f64) -> Self {
        self.param(key, fmt_f64(value))
    }

    pub fn value(mut self, value: f64) -> Self {
        self.value = Some(value);
        self
    }

    pub fn witness(mut self, key: &str, value: f64) -> Self {
        self.witness.insert(key.to_string(), value);
        self
    }

    pub fn note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }

    pub fn passed(&self) -> bool {
        self.status == Status::Pass
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CertificationReport {
    pub checks: Vec<CheckRecord>,
}

impl CertificationReport {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, record: CheckRecord) {
        self.checks.push(record);
    }

    pub fn merge(mut self, other: CertificationReport) -> Self {
        self.checks.extend(other.checks);
        self
    }

    pub fn extend(&mut self, other: CertificationReport) {
        self.checks.extend(other.checks);
    }

    /// Fail dominates Inconclusive, which dominates Pass. An empty report passes.
    pub fn status(&self) -> Status {
        if self.checks.iter().any(|c| c.status == Status::Fail) {
            Status::Fail
        } else if self.checks.iter().any(|c| c.status == Status::Inconclusive) {
            Status::Inconclusive
        } else {
            Status::Pass
        }
    }

    pub fn passed(&self) -> bool {
        self.status() == Status::Pass
    }

    pub fn get(&self, id: &str) -> Option<&CheckRecord> {
        self.checks.iter().find(|c| c.id == id)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckRecord> {
        self.checks.iter().filter(|c| c.status != Status::Pass)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        let mut file = File::create(path)?;
        file.write_all(self.to_json()?.as_bytes())?;
        file.write_all(b"\n")?;
        Ok(())
    }

    /// Columns: id, anchor, params, margin, value, pass, status.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut writer = csv::Writer::from_path(path)?;
        writer.write_record([
            "id", "anchor", "params", "margin", "value", "pass", "status",
        ])?;
        for c in &self.checks {
            let params = c
                .params
                .iter()
                .map(|(k, v)| format!("{k}={v}"))
                .collect::<Vec<_>>()
                .join(";");
            let status = match c.status {
                Status::Pass => "pass",
                Status::Fail => "fail",
                Status::Inconclusive => "inconclusive",
            };
            writer.write_record([
                c.id.as_str(),
                c.anchor.as_str(),
                params.as_str(),
                fmt_f64(c.margin).as_str(),
                c.value.map(fmt_f64).unwrap_or_default().as_str(),
                if c.passed() { "true" } else { "false" },
                status,
            ])?;
        }
        writer.flush()?;
        Ok(())
    }
}

/// 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("{x}")
    }
}

/// Writes a plot-data CSV with a header row.
pub fn write_plot_csv(path: &Path, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record(header)?;
    for row in rows {
        writer.write_record(row.iter().map(|x| fmt_f64(*x)))?;
    }
    writer.flush()?;
    Ok(())
}
