// SPDX-License-Identifier: Apache-2.0

use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};
use serde_json::{json, Value};

use crate::args::Format;

/// An output file: fixed name, provenance header and body.
pub struct Artifact {
    pub file_stem: &'static str,
    pub body: Body,
}

pub enum Body {
    /// Table with a `#`-prefixed provenance line above the header row.
    Csv(String),
    Json(Value),
}

impl Artifact {
    pub fn csv(file_stem: &'static str, table: String) -> Self {
        Self {
            file_stem,
            body: Body::Csv(table),
        }
    }

    pub fn json(file_stem: &'static str, value: Value) -> Self {
        Self {
            file_stem,
            body: Body::Json(value),
        }
    }

    /// Renders the artifact with `{seed, config, version}` embedded. CSV
    /// tables requested as JSON become `{"columns", "rows"}`.
    pub fn render(&self, provenance: &Value, format: Format) -> (String, String) {
        match (&self.body, format) {
            (Body::Csv(table), Format::Csv) => (
                format!("{}.csv", self.file_stem),
                format!(
                    "# {}\n{table}",
                    serde_json::to_string(provenance).expect("json")
                ),
            ),
            (Body::Csv(table), Format::Json) => (
                format!("{}.json", self.file_stem),
                envelope(provenance, csv_to_json(table)),
            ),
            (Body::Json(v), _) => (
                format!("{}.json", self.file_stem),
                envelope(provenance, v.clone()),
            ),
        }
    }
}

fn envelope(provenance: &Value, result: Value) -> String {
    let mut out = provenance.clone();
    out["result"] = result;
    let mut s = serde_json::to_string_pretty(&out).expect("json");
    s.push('\n');
    s
}

fn csv_to_json(table: &str) -> Value {
    let mut lines = table.lines();
    let columns: Vec<&str> = lines.next().unwrap_or("").split(',').collect();
    let rows: Vec<Vec<Value>> = lines
        .map(|l| {
            l.split(',')
                .map(|c| c.parse::<f64>().map_or_else(|_| json!(c), |v| json!(v)))
                .collect()
        })
        .collect();
    json!({ "columns": columns, "rows": rows })
}

/// Writes each artifact under `dir`, or concatenates them on stdout.
pub fn emit(
    artifacts: &[Artifact],
    provenance: &Value,
    format: Format,
    dir: Option<&Path>,
) -> Result<()> {
    match dir {
        Some(dir) => {
            fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            for a in artifacts {
                let (name, text) = a.render(provenance, format);
                let path = dir.join(name);
                fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
            }
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            for a in artifacts {
                stdout.write_all(a.render(provenance, format).1.as_bytes())?;
            }
        }
    }
    Ok(())
}
