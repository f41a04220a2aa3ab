//! Domains, meshes, quadrature rules and ball chains.

mod chain;
mod domain;
mod mesh;
mod quadrature;

pub use chain::{ball_chain, ball_chain_along, BallChain};
pub use domain::Domain;
pub use mesh::{build_polygon_mesh, build_rect_mesh, build_rect_mesh_tagged, BoundaryFacet, BoundaryTag, SimplicialMesh};
pub use quadrature::{
    annulus_quadrature, ball_quadrature, box_quadrature, disk_nystrom_quadrature, gauss_legendre,
    sphere_quadrature, Quadrature,
};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("mesh size must be positive")]
    NonPositiveH,
    #[error("mesh size {h} is not below the shortest side {side}")]
    HExceedsSide { h: f64, side: f64 },
    #[error("radius must be positive")]
    NonPositiveRadius,
    #[error("unsupported dimension {0}")]
    UnsupportedDimension(usize),
    #[error("invalid domain: {0}")]
    InvalidDomain(String),
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),
    #[error("mesh file: {0}")]
    MeshFormat(String),
    #[error("boundary facet {0:?} has no tag")]
    UntaggedBoundaryFacet(Vec<usize>),
    #[error("invalid quadrature: {0}")]
    InvalidQuadrature(String),
    #[error("path clearance {clearance} is below the required {required}")]
    PathTooCloseToBoundary { clearance: f64, required: f64 },
    #[error("target unreachable: {0}")]
    TargetUnreachable(String),
    #[error("ball radius {r} exceeds the subdomain radius {omega_radius}")]
    InitialBallOutsideSubdomain { r: f64, omega_radius: f64 },
    #[error("invalid chain: {0}")]
    InvalidChain(String),
}
