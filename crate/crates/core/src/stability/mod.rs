//! Quantitative unique continuation: Carleman ratios, propagation of
//! smallness along ball chains, Cauchy data completion with stability-modulus
//! fits, and spectral observability.

mod carleman;
mod cauchy;
mod fit;
mod observability;
mod propagation;

pub use carleman::{
    caccioppoli_check, carleman_ratio, default_tau0, tau_grid, CaccioppoliReport, CarlemanPoint, CarlemanReport,
    CarlemanWeight, Support, WeightFamily,
};
pub use cauchy::{
    cauchy_complete, cauchy_mesh, cauchy_sweep, lower_half_error, manufactured_cauchy, noisy_cauchy_data, CauchyData,
    CauchyProblem, CauchyRow, CauchySweep, CauchySweepConfig, LCurvePoint, RegRule,
};
pub use fit::{log_modulus, stability_fit, Modulus, StabilityFit};
pub use observability::{cell_l2_squared, observability_ratio, ObservabilityReport};
pub use propagation::{
    iterate_recursion, recursion_bound, recursion_constant, smallness_propagation, PropagationReport,
    PropagationStep,
};

use thiserror::Error;

use crate::geometry::GeometryError;
use crate::linalg::LinalgError;
use crate::operators::OperatorError;
use crate::variational::VariationalError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StabilityError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error(transparent)]
    Variational(#[from] VariationalError),
    #[error("support reaches the boundary (clearance {clearance:e})")]
    SupportTouchesBoundary { clearance: f64 },
    #[error("field vanishes on its support")]
    DegenerateField,
    #[error("weight has a critical point near {point:?}")]
    CriticalPoint { point: Vec<f64> },
    #[error("ball of radius {radius} about {center:?} leaves the domain")]
    BallEscapesDomain { center: Vec<f64>, radius: f64 },
    #[error("invalid chain: {0}")]
    ChainInvalid(String),
    #[error("no boundary facet carries Cauchy data")]
    EmptyCauchyBoundary,
    #[error("normal equations are not positive definite")]
    SingularNormalEquations,
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("subdomain contains no mesh cell")]
    SubdomainUnresolved,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl From<LinalgError> for StabilityError {
    fn from(e: LinalgError) -> Self {
        StabilityError::Variational(e.into())
    }
}
