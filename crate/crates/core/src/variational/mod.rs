//! P1 finite elements for divergence-form operators.
//!
//! The bilinear form of `−∂ᵢ(aⁱʲ∂ⱼu + cⁱu) + dⁱ∂ᵢu + du` is
//! `a(u,v) = ∫(A∇u + cu)·∇v + (d·∇u)v + d uv`, plus `σ∫_Γ uv` on Robin
//! facets. Dirichlet vertices are eliminated; Neumann and Robin data enter
//! the load. Cauchy and Inaccessible facets behave as homogeneous Neumann.
//!
//! Coefficients are sampled once per cell at the barycenter, sources at
//! edge midpoints (Simpson in 1D), boundary data by Simpson's rule on each
//! edge.

mod checks;
mod eigen;

pub use checks::{
    compatibility_defect, poincare_wirtinger_check, weak_max_check, ExtremeReport, MaxPrincipleForm,
    PoincareWirtingerReport,
};
pub use eigen::{eigensolve, min_max_check, poincare_constant, rayleigh, MinMaxReport, PoincareReport, Spectrum};

use rayon::prelude::*;
use serde::Serialize;
use std::sync::Arc;
use thiserror::Error;

use crate::geometry::{BoundaryTag, GeometryError, SimplicialMesh};
use crate::linalg::{BandedLu, CsrMatrix, LinalgError};
use crate::operators::{EllipticOperator, OperatorError, OperatorForm, ScalarField};
use crate::small::{Mat3, Vec3, ZERO3, ZERO33};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum VariationalError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error("form is not coercive: pivot {pivot:e} at unknown {index}")]
    NonCoerciveForm { index: usize, pivot: f64 },
    #[error("linear system is singular")]
    SingularSystem,
    #[error("eigensolver did not converge in {iterations} iterations (residual {residual:e})")]
    ConvergenceFailure { iterations: usize, residual: f64 },
    #[error("vector is zero")]
    ZeroVector,
    #[error("subset has zero measure")]
    EmptySubset,
    #[error("assembled form is not symmetric (defect {defect:e})")]
    NotSymmetric { defect: f64 },
    #[error("min-max needs a form with Dirichlet vertices")]
    DirichletRequired,
    #[error("no free unknowns after Dirichlet elimination")]
    NoFreeUnknowns,
    #[error("length {actual} does not match {expected}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl From<LinalgError> for VariationalError {
    fn from(e: LinalgError) -> Self {
        match e {
            LinalgError::NonPositivePivot { index, value } => VariationalError::NonCoerciveForm { index, pivot: value },
            LinalgError::Singular => VariationalError::SingularSystem,
            LinalgError::DimensionMismatch { expected, actual } => {
                VariationalError::DimensionMismatch { expected, actual }
            }
        }
    }
}

type DataFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Boundary data keyed by facet tag.
///
/// Neumann data is the conormal flux `(A∇u + cu)·ν`; Robin data `g` means
/// `(A∇u + cu)·ν + σu = g`.
#[derive(Clone)]
pub struct BoundaryData {
    pub dirichlet: DataFn,
    pub neumann: DataFn,
    pub robin_coefficient: f64,
    pub robin: DataFn,
}

impl Default for BoundaryData {
    fn default() -> Self {
        BoundaryData {
            dirichlet: Arc::new(|_| 0.0),
            neumann: Arc::new(|_| 0.0),
            robin_coefficient: 1.0,
            robin: Arc::new(|_| 0.0),
        }
    }
}

impl BoundaryData {
    pub fn with_dirichlet(mut self, g: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        self.dirichlet = Arc::new(g);
        self
    }

    pub fn with_neumann(mut self, g: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        self.neumann = Arc::new(g);
        self
    }

    pub fn with_robin(mut self, sigma: f64, g: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        self.robin_coefficient = sigma;
        self.robin = Arc::new(g);
        self
    }
}

const FREE: usize = usize::MAX;

/// Global matrices and the reduced system after Dirichlet elimination.
#[derive(Debug, Clone)]
pub struct AssembledSystem {
    mesh: Arc<SimplicialMesh>,
    /// Full stiffness including Robin boundary mass.
    full_stiffness: CsrMatrix,
    full_mass: CsrMatrix,
    full_load: Vec<f64>,
    /// Vertex → free unknown, or `usize::MAX` for Dirichlet vertices.
    dof: Vec<usize>,
    free: Vec<usize>,
    dirichlet_values: Vec<f64>,
    pub stiffness: CsrMatrix,
    pub mass: CsrMatrix,
    pub load: Vec<f64>,
    symmetric: bool,
}

impl AssembledSystem {
    pub fn mesh(&self) -> &Arc<SimplicialMesh> {
        &self.mesh
    }

    pub fn num_free(&self) -> usize {
        self.free.len()
    }

    pub fn free_vertices(&self) -> &[usize] {
        &self.free
    }

    /// Free unknown of a vertex, if it is not Dirichlet.
    pub fn dof_of(&self, vertex: usize) -> Option<usize> {
        (self.dof[vertex] != FREE).then_some(self.dof[vertex])
    }

    pub fn has_dirichlet(&self) -> bool {
        self.free.len() < self.dof.len()
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn full_stiffness(&self) -> &CsrMatrix {
        &self.full_stiffness
    }

    pub fn full_mass(&self) -> &CsrMatrix {
        &self.full_mass
    }

    pub fn full_load(&self) -> &[f64] {
        &self.full_load
    }

    pub fn dirichlet_values(&self) -> &[f64] {
        &self.dirichlet_values
    }

    /// Restricts a vertex vector to the free unknowns.
    pub fn restrict(&self, values: &[f64]) -> Vec<f64> {
        self.free.iter().map(|&v| values[v]).collect()
    }

    /// Extends free values to all vertices using the Dirichlet data.
    pub fn extend(&self, free_values: &[f64]) -> Vec<f64> {
        let mut out = self.dirichlet_values.clone();
        for (k, &v) in self.free.iter().enumerate() {
            out[v] = free_values[k];
        }
        out
    }

    /// Extends free values with zero on Dirichlet vertices.
    pub fn extend_homogeneous(&self, free_values: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dof.len()];
        for (k, &v) in self.free.iter().enumerate() {
            out[v] = free_values[k];
        }
        out
    }

    /// Largest |a(u_h, φ_i) − Φ(φ_i)| over free basis functions.
    pub fn galerkin_residual(&self, u: &DiscreteField) -> f64 {
        let ku = self.full_stiffness.matvec(u.values());
        self.free
            .iter()
            .map(|&v| (ku[v] - self.full_load[v]).abs())
            .fold(0.0, f64::max)
    }
}

/// Per-cell data from the barycentric gradients of a P1 simplex.
struct LocalCell {
    nodes: Vec<usize>,
    measure: f64,
    grads: Vec<Vec3>,
}

fn local_cell(mesh: &SimplicialMesh, c: usize) -> LocalCell {
    let nodes = mesh.cell(c).to_vec();
    let measure = mesh.cell_measure(c);
    let grads = if mesh.dim() == 1 {
        let len = mesh.vertex(nodes[1])[0] - mesh.vertex(nodes[0])[0];
        vec![[-1.0 / len, 0.0, 0.0], [1.0 / len, 0.0, 0.0]]
    } else {
        let p: Vec<&[f64]> = nodes.iter().map(|&i| mesh.vertex(i)).collect();
        let det = 2.0 * measure;
        vec![
            [(p[1][1] - p[2][1]) / det, (p[2][0] - p[1][0]) / det, 0.0],
            [(p[2][1] - p[0][1]) / det, (p[0][0] - p[2][0]) / det, 0.0],
            [(p[0][1] - p[1][1]) / det, (p[1][0] - p[0][0]) / det, 0.0],
        ]
    };
    LocalCell { nodes, measure, grads }
}

/// Assembles the form of a divergence-form operator with source `f`.
pub fn assemble(
    mesh: Arc<SimplicialMesh>,
    op: &EllipticOperator,
    f: impl Fn(&[f64]) -> f64 + Sync,
    data: &BoundaryData,
) -> Result<AssembledSystem, VariationalError> {
    if op.form() != OperatorForm::Divergence {
        return Err(OperatorError::FormMismatch {
            expected: OperatorForm::Divergence,
            actual: op.form(),
        }
        .into());
    }
    if op.dim() != mesh.dim() {
        return Err(OperatorError::DimensionMismatch {
            operator: op.dim(),
            field: mesh.dim(),
        }
        .into());
    }
    mesh.check_tags()?;
    let d = mesh.dim();
    let nv = mesh.num_vertices();
    let has_drift = op.has_drift();
    let has_flux = op.has_flux();
    let per_cell: Vec<(Vec<(usize, usize, f64)>, Vec<(usize, usize, f64)>, Vec<(usize, f64)>)> = (0..mesh.num_cells())
        .into_par_iter()
        .map(|c| {
            let cell = local_cell(&mesh, c);
            let x = mesh.cell_centroid(c);
            let a: Mat3 = op.principal(&x);
            let flux: Vec3 = if has_flux { op.flux(&x) } else { ZERO3 };
            let drift: Vec3 = if has_drift { op.drift(&x) } else { ZERO3 };
            let pot = op.potential(&x);
            let k = d + 1;
            let mass_unit = cell.measure / ((d + 1) * (d + 2)) as f64;
            let mean = cell.measure / (d + 1) as f64;
            let mut kt = Vec::with_capacity(k * k);
            let mut mt = Vec::with_capacity(k * k);
            for i in 0..k {
                for j in 0..k {
                    let agj = crate::small::mat_vec(&a, &cell.grads[j], d);
                    let mut s = cell.measure * crate::small::dot(&agj[..d], &cell.grads[i][..d]);
                    s += mean * crate::small::dot(&flux[..d], &cell.grads[i][..d]);
                    s += mean * crate::small::dot(&drift[..d], &cell.grads[j][..d]);
                    let m = mass_unit * if i == j { 2.0 } else { 1.0 };
                    s += pot * m;
                    kt.push((cell.nodes[i], cell.nodes[j], s));
                    mt.push((cell.nodes[i], cell.nodes[j], m));
                }
            }
            let load = cell_load(&mesh, &cell, &f);
            (kt, mt, load)
        })
        .collect();
    let mut kt = Vec::with_capacity(per_cell.len() * (d + 1) * (d + 1));
    let mut mt = Vec::with_capacity(kt.capacity());
    let mut load = vec![0.0; nv];
    for (k, m, l) in per_cell {
        kt.extend(k);
        mt.extend(m);
        for (i, v) in l {
            load[i] += v;
        }
    }
    let mut dirichlet = vec![false; nv];
    for facet in mesh.boundary() {
        match facet.tag {
            BoundaryTag::Dirichlet => facet.nodes.iter().for_each(|&i| dirichlet[i] = true),
            BoundaryTag::Neumann => add_facet_load(&mesh, &facet.nodes, &*data.neumann, &mut load),
            BoundaryTag::Robin => {
                add_facet_load(&mesh, &facet.nodes, &*data.robin, &mut load);
                add_facet_mass(&mesh, &facet.nodes, data.robin_coefficient, &mut kt);
            }
            BoundaryTag::Cauchy | BoundaryTag::Inaccessible => {}
        }
    }
    let full_stiffness = CsrMatrix::from_triplets(nv, nv, kt);
    let full_mass = CsrMatrix::from_triplets(nv, nv, mt);
    let mut dof = vec![FREE; nv];
    let mut free = Vec::new();
    let mut dirichlet_values = vec![0.0; nv];
    for v in 0..nv {
        if dirichlet[v] {
            dirichlet_values[v] = (data.dirichlet)(mesh.vertex(v));
        } else {
            dof[v] = free.len();
            free.push(v);
        }
    }
    if free.is_empty() {
        return Err(VariationalError::NoFreeUnknowns);
    }
    let lift = full_stiffness.matvec(&dirichlet_values);
    let reduced_load: Vec<f64> = free.iter().map(|&v| load[v] - lift[v]).collect();
    let stiffness = full_stiffness.submatrix(&dof, &dof, free.len(), free.len());
    let mass = full_mass.submatrix(&dof, &dof, free.len(), free.len());
    let symmetric = !has_drift && !has_flux;
    Ok(AssembledSystem {
        mesh,
        full_stiffness,
        full_mass,
        full_load: load,
        dof,
        free,
        dirichlet_values,
        stiffness,
        mass,
        load: reduced_load,
        symmetric,
    })
}

fn cell_load(mesh: &SimplicialMesh, cell: &LocalCell, f: &(impl Fn(&[f64]) -> f64 + Sync)) -> Vec<(usize, f64)> {
    let n = &cell.nodes;
    let mid = |a: usize, b: usize| -> Vec<f64> {
        mesh.vertex(a).iter().zip(mesh.vertex(b)).map(|(p, q)| 0.5 * (p + q)).collect()
    };
    if mesh.dim() == 1 {
        let fm = f(&mid(n[0], n[1]));
        return (0..2)
            .map(|i| (n[i], cell.measure / 6.0 * (f(mesh.vertex(n[i])) + 2.0 * fm)))
            .collect();
    }
    let f01 = f(&mid(n[0], n[1]));
    let f12 = f(&mid(n[1], n[2]));
    let f20 = f(&mid(n[2], n[0]));
    let w = cell.measure / 6.0;
    vec![(n[0], w * (f01 + f20)), (n[1], w * (f01 + f12)), (n[2], w * (f12 + f20))]
}

fn add_facet_load(mesh: &SimplicialMesh, nodes: &[usize], g: &(dyn Fn(&[f64]) -> f64 + Send + Sync), load: &mut [f64]) {
    if mesh.dim() == 1 {
        load[nodes[0]] += g(mesh.vertex(nodes[0]));
        return;
    }
    let len = mesh.facet_measure(nodes);
    let gm = g(&mesh.facet_midpoint(nodes));
    for &i in nodes {
        load[i] += len / 6.0 * (g(mesh.vertex(i)) + 2.0 * gm);
    }
}

fn add_facet_mass(mesh: &SimplicialMesh, nodes: &[usize], sigma: f64, kt: &mut Vec<(usize, usize, f64)>) {
    if mesh.dim() == 1 {
        kt.push((nodes[0], nodes[0], sigma));
        return;
    }
    let len = mesh.facet_measure(nodes);
    for &i in nodes {
        for &j in nodes {
            kt.push((i, j, sigma * len / 6.0 * if i == j { 2.0 } else { 1.0 }));
        }
    }
}

/// Solves the reduced system by banded LU and inserts the Dirichlet values.
pub fn solve(system: &AssembledSystem) -> Result<DiscreteField, VariationalError> {
    let lu = BandedLu::factor(&system.stiffness)?;
    let x = lu.solve(&system.load)?;
    let r = system.stiffness.matvec(&x);
    let res = crate::linalg::norm2(&r.iter().zip(&system.load).map(|(a, b)| a - b).collect::<Vec<_>>());
    let scale = crate::linalg::norm2(&system.load).max(system.stiffness.max_abs() * crate::linalg::norm2(&x));
    if scale > 0.0 && res > 1e-10 * scale {
        return Err(VariationalError::SingularSystem);
    }
    DiscreteField::new(system.mesh.clone(), system.extend(&x))
}

/// Piecewise-linear field given by vertex values.
#[derive(Debug, Clone)]
pub struct DiscreteField {
    mesh: Arc<SimplicialMesh>,
    values: Vec<f64>,
}

#[derive(Serialize)]
struct FieldDump {
    dim: usize,
    values: std::collections::BTreeMap<usize, f64>,
}

impl DiscreteField {
    pub fn new(mesh: Arc<SimplicialMesh>, values: Vec<f64>) -> Result<Self, VariationalError> {
        if values.len() != mesh.num_vertices() {
            return Err(VariationalError::DimensionMismatch {
                expected: mesh.num_vertices(),
                actual: values.len(),
            });
        }
        Ok(DiscreteField { mesh, values })
    }

    /// Nodal interpolant of a function.
    pub fn interpolate(mesh: Arc<SimplicialMesh>, f: impl Fn(&[f64]) -> f64) -> Self {
        let values = (0..mesh.num_vertices()).map(|i| f(mesh.vertex(i))).collect();
        DiscreteField { mesh, values }
    }

    pub fn mesh(&self) -> &Arc<SimplicialMesh> {
        &self.mesh
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// L² norm using the consistent mass matrix.
    pub fn l2_norm(&self, mass: &CsrMatrix) -> f64 {
        mass.bilinear(&self.values, &self.values).max(0.0).sqrt()
    }

    /// L² distance to `f`, with a 7-point (3-point in 1D) rule on each cell.
    pub fn l2_error(&self, f: impl Fn(&[f64]) -> f64) -> f64 {
        let mesh = &*self.mesh;
        let mut total = 0.0;
        for c in 0..mesh.num_cells() {
            let cell = mesh.cell(c);
            let area = mesh.cell_measure(c);
            for (bary, w) in error_rule(mesh.dim()) {
                let mut x = vec![0.0; mesh.dim()];
                let mut uh = 0.0;
                for (k, &i) in cell.iter().enumerate() {
                    for (d, xd) in x.iter_mut().enumerate() {
                        *xd += bary[k] * mesh.vertex(i)[d];
                    }
                    uh += bary[k] * self.values[i];
                }
                total += area * w * (uh - f(&x)).powi(2);
            }
        }
        total.sqrt()
    }

    /// JSON object mapping vertex index to value.
    pub fn to_json(&self) -> String {
        let dump = FieldDump {
            dim: self.mesh.dim(),
            values: self.values.iter().copied().enumerate().collect(),
        };
        serde_json::to_string_pretty(&dump).expect("field dump serializes")
    }

    /// CSV with columns x[,y],u.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(if self.mesh.dim() == 1 { "x,u\n" } else { "x,y,u\n" });
        for (i, v) in self.values.iter().enumerate() {
            for c in self.mesh.vertex(i) {
                out.push_str(&format!("{c},"));
            }
            out.push_str(&format!("{v}\n"));
        }
        out
    }
}

fn error_rule(dim: usize) -> Vec<(Vec<f64>, f64)> {
    if dim == 1 {
        let s = (0.6f64).sqrt();
        return vec![
            (vec![0.5 * (1.0 + s), 0.5 * (1.0 - s)], 5.0 / 18.0),
            (vec![0.5, 0.5], 8.0 / 18.0),
            (vec![0.5 * (1.0 - s), 0.5 * (1.0 + s)], 5.0 / 18.0),
        ];
    }
    let s15 = 15f64.sqrt();
    let (a1, b1) = ((6.0 - s15) / 21.0, (9.0 + 2.0 * s15) / 21.0);
    let (a2, b2) = ((6.0 + s15) / 21.0, (9.0 - 2.0 * s15) / 21.0);
    let (w1, w2) = ((155.0 - s15) / 1200.0, (155.0 + s15) / 1200.0);
    vec![
        (vec![1.0 / 3.0; 3], 9.0 / 40.0),
        (vec![a1, a1, b1], w1),
        (vec![a1, b1, a1], w1),
        (vec![b1, a1, a1], w1),
        (vec![a2, a2, b2], w2),
        (vec![a2, b2, a2], w2),
        (vec![b2, a2, a2], w2),
    ]
}

impl ScalarField for DiscreteField {
    fn dim(&self) -> usize {
        self.mesh.dim()
    }

    /// NaN outside the mesh.
    fn value(&self, x: &[f64]) -> f64 {
        match self.mesh.locate(x) {
            Some((c, bary)) => self.mesh.cell(c).iter().zip(&bary).map(|(&i, l)| l * self.values[i]).sum(),
            None => f64::NAN,
        }
    }

    /// Cellwise-constant gradient of the containing cell.
    fn gradient(&self, x: &[f64]) -> Option<Vec3> {
        let (c, _) = self.mesh.locate(x)?;
        let cell = local_cell(&self.mesh, c);
        let mut g = ZERO3;
        for (k, &i) in cell.nodes.iter().enumerate() {
            for d in 0..self.mesh.dim() {
                g[d] += self.values[i] * cell.grads[k][d];
            }
        }
        Some(g)
    }

    fn hessian(&self, _x: &[f64]) -> Option<Mat3> {
        Some(ZERO33)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_rect_mesh, build_rect_mesh_tagged, Domain};
    use std::f64::consts::PI;

    fn laplace(dim: usize) -> EllipticOperator {
        EllipticOperator::laplace(dim, OperatorForm::Divergence)
    }

    #[test]
    fn interval_quadratic_solution() {
        let mesh = Arc::new(build_rect_mesh(&Domain::interval(0.0, 1.0).unwrap(), 1.0 / 16.0).unwrap());
        let sys = assemble(mesh, &laplace(1), |_| 2.0, &BoundaryData::default()).unwrap();
        let u = solve(&sys).unwrap();
        // P1 is nodally exact for 1D problems with exact load integration.
        for (i, v) in u.values().iter().enumerate() {
            let x = u.mesh().vertex(i)[0];
            assert!((v - x * (1.0 - x)).abs() < 1e-13);
        }
        assert!(sys.galerkin_residual(&u) < 1e-12);
    }

    #[test]
    fn zero_data_gives_zero() {
        let mesh = Arc::new(build_rect_mesh(&Domain::unit_square(), 0.25).unwrap());
        let u = solve(&assemble(mesh, &laplace(2), |_| 0.0, &BoundaryData::default()).unwrap()).unwrap();
        assert!(u.values().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn neumann_form_conserves_mass() {
        let mesh = Arc::new(
            build_rect_mesh_tagged(&Domain::unit_square(), 0.125, |_| BoundaryTag::Neumann).unwrap(),
        );
        let op = laplace(2).with_potential(|_| 1.0);
        let sys = assemble(mesh, &op, |_| 1.0, &BoundaryData::default()).unwrap();
        let u = solve(&sys).unwrap();
        let ones = vec![1.0; u.values().len()];
        let integral = sys.full_mass().bilinear(u.values(), &ones);
        assert!((integral - 1.0).abs() < 1e-12);
        assert!(u.values().iter().all(|v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn robin_interval_reproduces_constant() {
        let mesh = Arc::new(
            build_rect_mesh_tagged(&Domain::interval(0.0, 1.0).unwrap(), 0.1, |_| BoundaryTag::Robin).unwrap(),
        );
        let data = BoundaryData::default().with_robin(1.0, |_| 1.0);
        let u = solve(&assemble(mesh, &laplace(1), |_| 0.0, &data).unwrap()).unwrap();
        assert!(u.values().iter().all(|v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn convection_diffusion_is_solvable() {
        let mesh = Arc::new(build_rect_mesh(&Domain::unit_square(), 1.0 / 16.0).unwrap());
        let op = laplace(2).with_drift(|_| [1.0, 0.0, 0.0]);
        let sys = assemble(mesh, &op, |_| 1.0, &BoundaryData::default()).unwrap();
        assert!(!sys.is_symmetric());
        let u = solve(&sys).unwrap();
        assert!(sys.galerkin_residual(&u) < 1e-10);
        assert!(u.values().iter().all(|v| *v >= -1e-14));
    }

    #[test]
    fn symmetric_form_gives_symmetric_matrix() {
        let mesh = Arc::new(build_rect_mesh(&Domain::unit_square(), 0.1).unwrap());
        let op = EllipticOperator::perturbed_identity(0.3, OperatorForm::Divergence);
        let sys = assemble(mesh, &op, |_| 1.0, &BoundaryData::default()).unwrap();
        assert!(sys.stiffness.max_asymmetry() <= 1e-12 * sys.stiffness.max_abs());
        assert!(sys.mass.max_asymmetry() == 0.0);
    }

    #[test]
    fn manufactured_solution_converges_quadratically() {
        let exact = |x: &[f64]| (PI * x[0]).sin() * (PI * x[1]).sin();
        let err = |h: f64| {
            let mesh = Arc::new(build_rect_mesh(&Domain::unit_square(), h).unwrap());
            let sys = assemble(mesh, &laplace(2), |x| 2.0 * PI * PI * exact(x), &BoundaryData::default()).unwrap();
            solve(&sys).unwrap().l2_error(exact)
        };
        let ratio = err(1.0 / 8.0) / err(1.0 / 16.0);
        assert!((3.6..=4.4).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn nondivergence_operator_is_rejected() {
        let mesh = Arc::new(build_rect_mesh(&Domain::unit_square(), 0.25).unwrap());
        let op = EllipticOperator::laplace(2, OperatorForm::Nondivergence);
        assert!(matches!(
            assemble(mesh, &op, |_| 0.0, &BoundaryData::default()),
            Err(VariationalError::Operator(OperatorError::FormMismatch { .. }))
        ));
    }

    #[test]
    fn discrete_field_interpolates_affine_exactly() {
        let mesh = Arc::new(build_rect_mesh(&Domain::unit_square(), 0.25).unwrap());
        let u = DiscreteField::interpolate(mesh, |x| 1.0 + 2.0 * x[0] - x[1]);
        assert!((u.value(&[0.33, 0.71]) - (1.0 + 0.66 - 0.71)).abs() < 1e-14);
        let g = u.gradient(&[0.33, 0.71]).unwrap();
        assert!((g[0] - 2.0).abs() < 1e-12 && (g[1] + 1.0).abs() < 1e-12);
        assert!(u.value(&[1.5, 0.5]).is_nan());
        assert!(u.to_csv().starts_with("x,y,u\n0,0,1\n"));
    }
}
