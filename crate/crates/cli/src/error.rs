use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("unknown experiment `{id}`; valid ids: {valid}")]
    UnknownExperiment { id: String, valid: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("{0}")]
    Module(String),
}

macro_rules! module_errors {
    ($($t:ty),*) => {
        $(impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Module(e.to_string())
            }
        })*
    };
}

module_errors!(
    elliptica::geometry::GeometryError,
    elliptica::operators::OperatorError,
    elliptica::variational::VariationalError,
    elliptica::harmonic::HarmonicError,
    elliptica::parametrix::ParametrixError,
    elliptica::stability::StabilityError
);

pub fn config(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}
