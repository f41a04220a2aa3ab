use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{Map, Value};

use crate::error::CliError;

pub const SCHEMA: &str = "1";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Assertion {
    pub name: String,
    /// Invariant of the library the assertion checks.
    pub invariant: String,
    pub passed: bool,
    pub value: f64,
    pub limit: f64,
    pub detail: String,
}

/// Collected results, assertions and CSV tables of one run.
#[derive(Debug, Default)]
pub struct Outcome {
    pub results: Map<String, Value>,
    pub assertions: Vec<Assertion>,
    pub tables: Vec<(String, String)>,
}

impl Outcome {
    pub fn result(&mut self, key: &str, value: impl Serialize) {
        let v = serde_json::to_value(value).expect("result serializes");
        self.results.insert(key.to_string(), v);
    }

    /// Records `value ≤ limit`.
    pub fn at_most(&mut self, name: &str, invariant: &str, value: f64, limit: f64) {
        self.push(name, invariant, value <= limit, value, limit, format!("{value:e} ≤ {limit:e}"));
    }

    /// Records `value ≥ limit`.
    pub fn at_least(&mut self, name: &str, invariant: &str, value: f64, limit: f64) {
        self.push(name, invariant, value >= limit, value, limit, format!("{value:e} ≥ {limit:e}"));
    }

    pub fn holds(&mut self, name: &str, invariant: &str, ok: bool, detail: String) {
        self.push(name, invariant, ok, f64::from(u8::from(ok)), 1.0, detail);
    }

    fn push(&mut self, name: &str, invariant: &str, passed: bool, value: f64, limit: f64, detail: String) {
        self.assertions.push(Assertion {
            name: name.to_string(),
            invariant: invariant.to_string(),
            passed,
            value,
            limit,
            detail,
        });
    }

    pub fn table(&mut self, file: &str, csv: String) {
        self.tables.push((file.to_string(), csv));
    }

    pub fn passed(&self) -> bool {
        self.assertions.iter().all(|a| a.passed)
    }
}

#[derive(Serialize)]
struct Report<'a> {
    schema: &'static str,
    experiment: &'a str,
    reference: &'a str,
    parameters: &'a Map<String, Value>,
    results: &'a Map<String, Value>,
    assertions: &'a [Assertion],
    passed: bool,
    files: Vec<&'a str>,
}

#[derive(Serialize)]
struct Metadata<'a> {
    schema: &'static str,
    experiment: &'a str,
    version: &'static str,
    /// Seconds since the Unix epoch.
    created: u64,
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes report.json, metadata.json and the CSV tables into `dir`.
///
/// report.json depends only on the inputs; the wall-clock time goes to
/// metadata.json.
pub fn write_all(
    dir: &Path,
    experiment: &str,
    reference: &str,
    parameters: &Map<String, Value>,
    outcome: &Outcome,
) -> Result<PathBuf, CliError> {
    fs::create_dir_all(dir).map_err(|source| CliError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let report = Report {
        schema: SCHEMA,
        experiment,
        reference,
        parameters,
        results: &outcome.results,
        assertions: &outcome.assertions,
        passed: outcome.passed(),
        files: outcome.tables.iter().map(|(f, _)| f.as_str()).collect(),
    };
    let path = dir.join("report.json");
    let mut text = serde_json::to_string_pretty(&report).map_err(|source| CliError::Json {
        path: path.clone(),
        source,
    })?;
    text.push('\n');
    write(&path, text.as_bytes())?;
    let created = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let meta = Metadata {
        schema: SCHEMA,
        experiment,
        version: env!("CARGO_PKG_VERSION"),
        created,
    };
    let mut mtext = serde_json::to_string_pretty(&meta).expect("metadata serializes");
    mtext.push('\n');
    write(&dir.join("metadata.json"), mtext.as_bytes())?;
    for (file, csv) in &outcome.tables {
        write(&dir.join(file), csv.as_bytes())?;
    }
    Ok(path)
}
