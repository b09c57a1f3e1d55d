//! Self-describing experiment reports with deterministic JSON and CSV output.

use std::collections::BTreeMap;

use serde::Serialize;
use serde_json::Value;

use crate::error::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

/// A target value, or the literal string `"none"` when there is nothing to
/// compare against.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Target {
    Value(f64),
    #[serde(serialize_with = "none_string")]
    None,
}

fn none_string<S: serde::Serializer>(s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str("none")
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultEntry {
    pub value: f64,
    pub target: Target,
    pub tolerance: f64,
    pub stderr: Option<f64>,
    /// `None` when there is no target.
    pub within_tolerance: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub schema_version: u32,
    pub subcommand: String,
    pub parameters: BTreeMap<String, Value>,
    pub results: BTreeMap<String, ResultEntry>,
    /// Boolean conditions that must hold for the report to pass.
    pub checks: BTreeMap<String, bool>,
    /// Informational values (matrices, eigenvalue lists, flags).
    pub observations: BTreeMap<String, Value>,
    pub paper_targets: BTreeMap<String, f64>,
    pub pass: bool,
}

impl ExperimentReport {
    pub fn new(subcommand: impl Into<String>) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            subcommand: subcommand.into(),
            parameters: BTreeMap::new(),
            results: BTreeMap::new(),
            checks: BTreeMap::new(),
            observations: BTreeMap::new(),
            paper_targets: BTreeMap::new(),
            pass: true,
        }
    }

    pub fn parameter(&mut self, key: &str, value: impl Serialize) -> Result<&mut Self> {
        self.parameters.insert(key.into(), serde_json::to_value(value)?);
        Ok(self)
    }

    pub fn observe(&mut self, key: &str, value: impl Serialize) -> Result<&mut Self> {
        self.observations.insert(key.into(), serde_json::to_value(value)?);
        Ok(self)
    }

    /// Records a value; with a target, `|value − target| ≤ tolerance` is
    /// required for the report to pass.
    pub fn result(&mut self, key: &str, value: f64, target: Option<f64>, tolerance: f64) -> &mut Self {
        self.result_with_stderr(key, value, target, tolerance, None)
    }

    pub fn result_with_stderr(
        &mut self,
        key: &str,
        value: f64,
        target: Option<f64>,
        tolerance: f64,
        stderr: Option<f64>,
    ) -> &mut Self {
        let within = target.map(|t| (value - t).abs() <= tolerance);
        if let Some(t) = target {
            self.paper_targets.insert(key.into(), t);
        }
        if within == Some(false) {
            self.pass = false;
        }
        self.results.insert(
            key.into(),
            ResultEntry {
                value,
                target: target.map_or(Target::None, Target::Value),
                tolerance,
                stderr,
                within_tolerance: within,
            },
        );
        self
    }

    pub fn check(&mut self, key: &str, ok: bool) -> &mut Self {
        if !ok {
            self.pass = false;
        }
        self.checks.insert(key.into(), ok);
        self
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// One row per entry: `section,key,value,target,tolerance,stderr,pass`.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["section", "key", "value", "target", "tolerance", "stderr", "pass"])?;
        let text = |v: &Value| match v {
            Value::String(s) => s.clone(),
            other => other.to_string(),
        };
        let opt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
        w.write_record(["meta", "schema_version", &self.schema_version.to_string(), "", "", "", ""])?;
        w.write_record(["meta", "subcommand", &self.subcommand, "", "", "", ""])?;
        for (k, v) in &self.parameters {
            w.write_record(["parameter", k, &text(v), "", "", "", ""])?;
        }
        for (k, r) in &self.results {
            let target = match r.target {
                Target::Value(t) => t.to_string(),
                Target::None => "none".into(),
            };
            let within = r.within_tolerance.map_or(String::new(), |b| b.to_string());
            w.write_record([
                "result",
                k,
                &r.value.to_string(),
                &target,
                &r.tolerance.to_string(),
                &opt(r.stderr),
                &within,
            ])?;
        }
        for (k, ok) in &self.checks {
            w.write_record(["check", k, &ok.to_string(), "", "", "", &ok.to_string()])?;
        }
        for (k, v) in &self.observations {
            w.write_record(["observation", k, &text(v), "", "", "", ""])?;
        }
        w.write_record(["meta", "pass", &self.pass.to_string(), "", "", "", ""])?;
        let bytes = w.into_inner().map_err(|e| Error::Serialization(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Serialization(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pass_tracks_targets_and_checks() {
        let mut r = ExperimentReport::new("clone");
        r.parameter("theta", 0.0).unwrap();
        r.result("fidelity", 5.0 / 6.0, Some(5.0 / 6.0), 1e-12);
        r.result("free", 3.0, None, 0.0);
        assert!(r.pass);
        r.check("agree", true);
        assert!(r.pass);
        r.result("bad", 1.0, Some(2.0), 0.5);
        assert!(!r.pass);
        assert_eq!(r.results["free"].target, Target::None);
        assert_eq!(r.paper_targets.len(), 2);
    }

    #[test]
    fn json_is_self_describing() {
        let mut r = ExperimentReport::new("spa");
        r.result("lambda_min", 0.25, None, 1e-12);
        r.result_with_stderr("f", 0.5, Some(0.5), 0.03, Some(0.01));
        let v: Value = serde_json::from_str(&r.to_json().unwrap()).unwrap();
        assert_eq!(v["schema_version"], 1);
        assert_eq!(v["results"]["lambda_min"]["target"], "none");
        assert_eq!(v["results"]["f"]["stderr"], 0.01);
        assert_eq!(v["pass"], true);
        assert_eq!(r.to_json().unwrap(), r.clone().to_json().unwrap());
    }

    #[test]
    fn csv_rows() {
        let mut r = ExperimentReport::new("ppt");
        r.parameter("w", 0.5).unwrap();
        r.check("entangled", true);
        r.result("x", 1.0, Some(1.0), 0.0);
        let csv = r.to_csv().unwrap();
        assert!(csv.starts_with("section,key,value,target,tolerance,stderr,pass\n"));
        assert!(csv.contains("parameter,w,0.5,,,,\n"));
        assert!(csv.contains("result,x,1,1,0,,true\n"));
        assert!(csv.ends_with("meta,pass,true,,,,\n"));
    }
}
