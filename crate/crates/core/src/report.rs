//! Machine-readable verification reports.
//!
//! A report stores named metrics and the criteria judged against them, so
//! verdicts can always be recomputed from the document alone.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparison {
    /// Pass when `metric ≤ threshold`.
    AtMost,
    /// Pass when `metric ≥ threshold`.
    AtLeast,
}

impl Comparison {
    pub fn holds(self, value: f64, threshold: f64) -> bool {
        match self {
            Comparison::AtMost => value <= threshold,
            Comparison::AtLeast => value >= threshold,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Criterion {
    pub name: String,
    pub metric: String,
    pub comparison: Comparison,
    pub threshold: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDocument {
    pub id: String,
    #[serde(default)]
    pub inputs: serde_json::Value,
    pub metrics: BTreeMap<String, f64>,
    pub criteria: Vec<Criterion>,
    #[serde(default)]
    pub wall_time_s: f64,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl ReportDocument {
    pub fn new(id: impl Into<String>) -> Self {
        ReportDocument {
            id: id.into(),
            inputs: serde_json::Value::Null,
            metrics: BTreeMap::new(),
            criteria: Vec::new(),
            wall_time_s: 0.0,
            seed: None,
            notes: Vec::new(),
        }
    }

    pub fn with_inputs(mut self, inputs: serde_json::Value) -> Self {
        self.inputs = inputs;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn metric(&mut self, name: impl Into<String>, value: f64) -> &mut Self {
        self.metrics.insert(name.into(), value);
        self
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.metrics.get(name).copied()
    }

    /// Record a metric and judge it in one step.
    pub fn check(&mut self, metric: &str, value: f64, comparison: Comparison, threshold: f64) -> bool {
        self.metric(metric, value);
        self.criterion(metric, metric, comparison, threshold)
    }

    pub fn at_most(&mut self, metric: &str, value: f64, threshold: f64) -> bool {
        self.check(metric, value, Comparison::AtMost, threshold)
    }

    pub fn at_least(&mut self, metric: &str, value: f64, threshold: f64) -> bool {
        self.check(metric, value, Comparison::AtLeast, threshold)
    }

    /// Judge an already recorded metric. A missing or NaN metric fails.
    pub fn criterion(&mut self, name: &str, metric: &str, comparison: Comparison, threshold: f64) -> bool {
        let pass = self.get(metric).is_some_and(|v| comparison.holds(v, threshold));
        self.criteria.push(Criterion {
            name: name.to_string(),
            metric: metric.to_string(),
            comparison,
            threshold,
            pass,
        });
        pass
    }

    pub fn note(&mut self, text: impl Into<String>) {
        self.notes.push(text.into());
    }

    pub fn passed(&self) -> bool {
        self.criteria.iter().all(|c| c.pass)
    }

    pub fn failures(&self) -> Vec<&Criterion> {
        self.criteria.iter().filter(|c| !c.pass).collect()
    }

    /// Recompute every verdict from the recorded metrics and thresholds.
    pub fn reevaluate(&mut self) {
        for c in &mut self.criteria {
            c.pass = self
                .metrics
                .get(&c.metric)
                .is_some_and(|v| c.comparison.holds(*v, c.threshold));
        }
    }

    /// Multiply every upper-bound threshold by `factor` and rejudge.
    /// Lower bounds (coverage fractions and the like) are left alone.
    pub fn scale_tolerances(&mut self, factor: f64) {
        for c in &mut self.criteria {
            if c.comparison == Comparison::AtMost {
                c.threshold *= factor;
            }
        }
        self.reevaluate();
    }

    /// Fold another report's metrics and criteria in, prefixing names.
    pub fn absorb(&mut self, prefix: &str, other: &ReportDocument) {
        for (k, v) in &other.metrics {
            self.metrics.insert(format!("{prefix}.{k}"), *v);
        }
        for c in &other.criteria {
            self.criteria.push(Criterion {
                name: format!("{prefix}.{}", c.name),
                metric: format!("{prefix}.{}", c.metric),
                ..c.clone()
            });
        }
        for n in &other.notes {
            self.notes.push(format!("{prefix}: {n}"));
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n")?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn verdicts_follow_metrics() {
        let mut r = ReportDocument::new("t");
        assert!(r.at_most("w1", 0.01, 0.02));
        assert!(!r.at_least("frac", 0.9, 0.95));
        assert!(!r.passed());
        assert_eq!(r.failures().len(), 1);
        r.metrics.insert("frac".into(), 0.99);
        r.reevaluate();
        assert!(r.passed());
    }

    #[test]
    fn nan_metric_fails() {
        let mut r = ReportDocument::new("t");
        assert!(!r.at_most("x", f64::NAN, 1.0));
    }

    #[test]
    fn tolerance_scale_only_touches_upper_bounds() {
        let mut r = ReportDocument::new("t");
        r.at_most("w1", 0.01, 0.02);
        r.at_least("frac", 0.96, 0.95);
        r.scale_tolerances(1e-6);
        assert!(!r.criteria[0].pass);
        assert!(r.criteria[1].pass);
        assert_eq!(r.criteria[1].threshold, 0.95);
    }

    #[test]
    fn json_round_trip_reproduces_verdicts() {
        let mut r = ReportDocument::new("t").with_seed(7);
        r.at_most("a", 0.1 + 0.2, 0.3);
        r.at_most("b", 1e-17, 1e-16);
        let back = ReportDocument::from_json(&r.to_json().unwrap()).unwrap();
        assert_eq!(back, r);
        let mut again = back.clone();
        again.reevaluate();
        assert_eq!(again, back);
    }
}
