//! Numerical toolkit for second-order elliptic operators.
//!
//! The crate pairs small, exact oracles with discrete solvers so that
//! classical inequalities (mean value, Harnack, frequency monotonicity,
//! doubling, Carleman, three-ball) and constructive results (variational
//! solvability, spectra, Levi parametrix, Cauchy stability) can be checked
//! numerically.
//!
//! Modules, bottom-up:
//! - [`geometry`]: domains, simplicial meshes, quadrature, ball chains.
//! - [`operators`]: elliptic operators and scalar fields.
//! - [`linalg`]: sparse and banded helpers used by the solvers.
//! - [`variational`]: P1 finite elements, eigenpairs, extremal checks.
//! - [`harmonic`]: harmonic polynomials, radial diagnostics, Perron iteration.
//! - [`parametrix`]: canonical parametrix and Nyström fundamental solutions.
//! - [`stability`]: Carleman ratios, propagation of smallness, Cauchy data.

// `!(x > 0.0)` rejects NaN; index loops mirror the component formulas.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop, clippy::type_complexity)]

pub mod geometry;
pub mod harmonic;
pub mod linalg;
pub mod operators;
pub mod parametrix;
pub mod small;
pub mod stability;
pub mod variational;

pub use geometry::{BallChain, BoundaryTag, Domain, GeometryError, Quadrature, SimplicialMesh};

pub use operators::{EllipticOperator, FiniteDifference, OperatorError, OperatorForm, ScalarField};
