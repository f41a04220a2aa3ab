//! Batch experiment runner for the elliptica toolkit.

pub mod catalog;
pub mod error;
pub mod experiments;
pub mod params;
pub mod report;

use std::path::{Path, PathBuf};

use serde_json::{Map, Value};

pub use error::CliError;
pub use report::Outcome;

/// Result of a completed run.
#[derive(Debug)]
pub struct RunSummary {
    pub experiment: String,
    pub report: PathBuf,
    pub passed: bool,
    pub failed: Vec<String>,
}

/// A config document split into its parts.
#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub experiment: String,
    pub out: Option<PathBuf>,
    pub params: Map<String, Value>,
}

/// Parses a config document: an object with `experiment`, an optional `out`
/// directory and the experiment parameters.
pub fn parse_config(text: &str) -> Result<Config, CliError> {
    let value: Value = serde_json::from_str(text).map_err(|e| CliError::Config(format!("invalid JSON: {e}")))?;
    let Value::Object(mut map) = value else {
        return Err(CliError::Config("top level must be an object".into()));
    };
    let id = match map.remove("experiment") {
        Some(Value::String(s)) => s,
        _ => return Err(CliError::Config("missing string field `experiment`".into())),
    };
    let out = match map.remove("out") {
        None => None,
        Some(Value::String(s)) => Some(PathBuf::from(s)),
        Some(_) => return Err(CliError::Config("`out` must be a string".into())),
    };
    Ok(Config {
        experiment: id,
        out,
        params: map,
    })
}

/// Runs the experiment described by `text`; `out` and `seed` override the config.
pub fn run_config(text: &str, out: Option<&Path>, seed: Option<u64>) -> Result<RunSummary, CliError> {
    let Config {
        experiment: id,
        out: config_out,
        params: given,
    } = parse_config(text)?;
    let exp = catalog::find(&id).ok_or_else(|| CliError::UnknownExperiment {
        id: id.clone(),
        valid: catalog::ids().join(", "),
    })?;
    let params = params::Params::resolve(&exp, &given, seed)?;
    let dir = out
        .map(Path::to_path_buf)
        .or(config_out)
        .unwrap_or_else(|| PathBuf::from("out").join(&id));
    let outcome = experiments::run(&id, &params)?;
    let report = report::write_all(&dir, exp.id, exp.reference, params.as_map(), &outcome)?;
    Ok(RunSummary {
        experiment: id,
        report,
        passed: outcome.passed(),
        failed: outcome.assertions.iter().filter(|a| !a.passed).map(|a| a.name.clone()).collect(),
    })
}
