//! Scripted reproductions of the quantitative claims, each returning a self-checking report.

use std::collections::BTreeMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

mod fig2;
mod i3322;
mod runs;

pub use fig2::{repro_fig2, RegionPoint, RegionScan, FIG2_WITNESS};
pub use i3322::{
    calibrate_i3322, i3322_value, repro_3322, search_3322, I3322Functional, Search3322,
    I3322_TARGET,
};
pub use runs::{
    repro_concavity, repro_correlated, repro_d2dd, repro_oracle, repro_qbound, repro_result1,
    repro_uffink,
};

/// Where an expected value comes from: a published closed form or an independent derivation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Published,
    DerivedOracle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub expected: Value,
    pub actual: Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    pub provenance: Provenance,
    pub passed: bool,
}

impl Check {
    pub fn close(name: impl Into<String>, expected: f64, actual: f64, tol: f64, provenance: Provenance) -> Self {
        Check {
            name: name.into(),
            expected: json!(expected),
            actual: json!(actual),
            tolerance: Some(tol),
            provenance,
            passed: (expected - actual).abs() <= tol,
        }
    }

    pub fn equal<T: Serialize + PartialEq>(name: impl Into<String>, expected: T, actual: T, provenance: Provenance) -> Self {
        Check {
            name: name.into(),
            passed: expected == actual,
            expected: json!(expected),
            actual: json!(actual),
            tolerance: None,
            provenance,
        }
    }

    /// `actual <= limit`.
    pub fn at_most(name: impl Into<String>, limit: f64, actual: f64, provenance: Provenance) -> Self {
        Check {
            name: name.into(),
            expected: json!({ "at_most": limit }),
            actual: json!(actual),
            tolerance: None,
            provenance,
            passed: actual <= limit,
        }
    }

    pub fn holds(name: impl Into<String>, ok: bool, provenance: Provenance) -> Self {
        Check::equal(name, true, ok, provenance)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub name: String,
    pub parameters: BTreeMap<String, Value>,
    pub values: BTreeMap<String, Value>,
    pub checks: Vec<Check>,
    pub runtime_secs: f64,
}

impl ExperimentResult {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failed_checks(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

/// Collects checks and values while timing one experiment.
pub(crate) struct Recorder {
    name: String,
    start: Instant,
    parameters: BTreeMap<String, Value>,
    values: BTreeMap<String, Value>,
    checks: Vec<Check>,
}

impl Recorder {
    pub(crate) fn new(name: &str) -> Self {
        Recorder {
            name: name.to_string(),
            start: Instant::now(),
            parameters: BTreeMap::new(),
            values: BTreeMap::new(),
            checks: Vec::new(),
        }
    }

    pub(crate) fn param(&mut self, key: &str, v: impl Serialize) {
        self.parameters.insert(key.to_string(), json!(v));
    }

    pub(crate) fn value(&mut self, key: &str, v: impl Serialize) {
        self.values.insert(key.to_string(), json!(v));
    }

    pub(crate) fn check(&mut self, c: Check) {
        self.checks.push(c);
    }

    pub(crate) fn finish(self) -> ExperimentResult {
        ExperimentResult {
            name: self.name,
            parameters: self.parameters,
            values: self.values,
            checks: self.checks,
            runtime_secs: self.start.elapsed().as_secs_f64(),
        }
    }
}
