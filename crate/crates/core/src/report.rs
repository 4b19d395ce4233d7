//! Structured verification results and their JSON-lines encoding.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Denominators are floored here so that ratios stay finite.
pub const RHS_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportEntry {
    pub check: String,
    pub grid_point: Vec<f64>,
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub check: String,
    pub pass: bool,
    pub tolerance: f64,
    pub fitted: BTreeMap<String, f64>,
    pub eps0: Option<f64>,
    pub notes: Vec<String>,
    pub entries: Vec<ReportEntry>,
}

impl VerificationReport {
    pub fn new(check: impl Into<String>) -> Self {
        Self {
            check: check.into(),
            pass: true,
            tolerance: 0.0,
            fitted: BTreeMap::new(),
            eps0: None,
            notes: Vec::new(),
            entries: Vec::new(),
        }
    }

    pub fn push(&mut self, grid_point: Vec<f64>, lhs: f64, rhs: f64) {
        let ratio = lhs / rhs.max(RHS_FLOOR);
        self.entries.push(ReportEntry { check: self.check.clone(), grid_point, lhs, rhs, ratio });
    }

    pub fn max_ratio(&self) -> f64 {
        self.entries.iter().map(|e| e.ratio).fold(0.0, f64::max)
    }

    /// Entry with the largest ratio; ties resolve to the first in insertion order.
    pub fn worst(&self) -> Option<&ReportEntry> {
        let mut best: Option<&ReportEntry> = None;
        for e in &self.entries {
            if best.is_none_or(|b| e.ratio > b.ratio) {
                best = Some(e);
            }
        }
        best
    }

    pub fn fit(&mut self, name: &str, value: f64) {
        self.fitted.insert(name.to_string(), value);
    }

    pub fn note(&mut self, text: impl Into<String>) {
        self.notes.push(text.into());
    }

    /// One record per entry followed by a summary record.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            let v = serde_json::json!({
                "record": "check",
                "check": e.check,
                "grid_point": e.grid_point,
                "lhs": e.lhs,
                "rhs": e.rhs,
                "ratio": e.ratio,
            });
            out.push_str(&v.to_string());
            out.push('\n');
        }
        let summary = serde_json::json!({
            "record": "summary",
            "check": self.check,
            "pass": self.pass,
            "tolerance": self.tolerance,
            "fitted": self.fitted,
            "eps0": self.eps0,
            "notes": self.notes,
            "max_ratio": self.max_ratio(),
        });
        out.push_str(&summary.to_string());
        out.push('\n');
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ratio_and_worst() {
        let mut r = VerificationReport::new("demo");
        r.push(vec![1.0], 1.0, 2.0);
        r.push(vec![2.0], 3.0, 2.0);
        r.push(vec![3.0], 1.0, 0.0);
        assert_eq!(r.worst().unwrap().grid_point, vec![3.0]);
        assert!((r.entries[1].ratio - 1.5).abs() < 1e-15);
        let text = r.to_jsonl();
        assert_eq!(text.lines().count(), 4);
        for line in text.lines() {
            let v: serde_json::Value = serde_json::from_str(line).unwrap();
            assert!(v.get("check").is_some());
        }
    }
}
