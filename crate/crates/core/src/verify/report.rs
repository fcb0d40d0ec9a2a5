// SPDX-License-Identifier: Apache-2.0

use serde::Serialize;
use serde_json::{json, Value};

/// One pass/fail line of a [`TestReport`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TestEntry {
    pub name: String,
    pub pass: bool,
    pub statistic: f64,
    pub threshold: f64,
    pub details: String,
}

impl TestEntry {
    pub fn new(
        name: impl Into<String>,
        pass: bool,
        statistic: f64,
        threshold: f64,
        details: impl Into<String>,
    ) -> Self {
        Self {
            name: name.into(),
            pass,
            statistic,
            threshold,
            details: details.into(),
        }
    }

    /// Passes iff `statistic <= threshold`.
    pub fn at_most(name: impl Into<String>, statistic: f64, threshold: f64) -> Self {
        Self::new(
            name,
            statistic <= threshold,
            statistic,
            threshold,
            format!("{statistic:e} <= {threshold:e}"),
        )
    }

    pub fn with_details(mut self, details: impl Into<String>) -> Self {
        self.details = details.into();
        self
    }
}

/// Ordered collection of check results plus the seed and configuration
/// that produced them.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TestReport {
    pub seed: u64,
    pub config: Value,
    pub entries: Vec<TestEntry>,
}

impl TestReport {
    pub fn new(seed: u64, config: Value) -> Self {
        Self {
            seed,
            config,
            entries: Vec::new(),
        }
    }

    pub fn push(&mut self, entry: TestEntry) {
        self.entries.push(entry);
    }

    /// Appends `other`'s entries with `prefix/` prepended to their names.
    pub fn absorb(&mut self, prefix: &str, other: TestReport) {
        for mut e in other.entries {
            e.name = format!("{prefix}/{}", e.name);
            self.entries.push(e);
        }
    }

    pub fn all_pass(&self) -> bool {
        self.entries.iter().all(|e| e.pass)
    }

    pub fn entry(&self, name: &str) -> Option<&TestEntry> {
        self.entries.iter().find(|e| e.name == name)
    }

    pub fn failures(&self) -> impl Iterator<Item = &TestEntry> {
        self.entries.iter().filter(|e| !e.pass)
    }

    pub fn to_json_value(&self) -> Value {
        json!({
            "seed": self.seed,
            "config": self.config,
            "all_pass": self.all_pass(),
            "entries": self.entries,
        })
    }

    /// Pretty JSON; byte-identical for identical inputs.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_json_value()).expect("report serializes")
    }
}
