use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::fit::{stability_fit, Modulus, StabilityFit};
use super::observability::cell_l2_squared;
use super::StabilityError;
use crate::geometry::{build_rect_mesh_tagged, BoundaryTag, Domain, SimplicialMesh};
use crate::linalg::BandedLu;
use crate::operators::{EllipticOperator, OperatorForm};
use crate::variational::{assemble, BoundaryData, DiscreteField};

/// Trace and outward conormal flux at the Cauchy vertices.
#[derive(Debug, Clone, PartialEq)]
pub struct CauchyData {
    pub trace: Vec<f64>,
    pub flux: Vec<f64>,
}

/// Discrete Cauchy problem on a mesh whose Γ₀ facets carry
/// [`BoundaryTag::Cauchy`].
///
/// Unknowns are the boundary values; interior values follow from the
/// discrete equation Lu = 0 through the extension operator E. The objective
/// is the L²(Γ₀) trace mismatch, the flux mismatch measured against the
/// lumped boundary mass, and reg·uᵀKu.
pub struct CauchyProblem {
    mesh: Arc<SimplicialMesh>,
    /// Vertices of Γ₀, in increasing order.
    cauchy: Vec<usize>,
    boundary: Vec<usize>,
    /// Full vertex values from boundary values, columns per boundary vertex.
    extension: DMatrix<f64>,
    /// Γ₀ boundary mass on the Cauchy vertices.
    boundary_mass: DMatrix<f64>,
    /// Data part of the normal matrix.
    data_normal: DMatrix<f64>,
    /// Dirichlet energy of the extension, EᵀKE.
    energy: DMatrix<f64>,
    /// Rows of KE at Γ₀ vertices interior to Γ₀, scaled by 1/lumped mass.
    flux_rows: DMatrix<f64>,
    flux_vertices: Vec<usize>,
    lumped: Vec<f64>,
    /// Position of each Cauchy vertex in the boundary list.
    cauchy_in_boundary: Vec<usize>,
}

impl CauchyProblem {
    pub fn new(mesh: Arc<SimplicialMesh>, op: &EllipticOperator) -> Result<Self, StabilityError> {
        let system = assemble(mesh.clone(), op, |_| 0.0, &BoundaryData::default())?;
        let k = system.full_stiffness();
        let nv = mesh.num_vertices();
        let d = mesh.dim();

        let on_boundary = mesh.boundary_vertex_mask();
        let on_cauchy = mesh.tagged_vertex_mask(BoundaryTag::Cauchy);
        let cauchy: Vec<usize> = (0..nv).filter(|&i| on_cauchy[i]).collect();
        if cauchy.is_empty() {
            return Err(StabilityError::EmptyCauchyBoundary);
        }
        let mut touches_other = vec![false; nv];
        for f in mesh.boundary().iter().filter(|f| f.tag != BoundaryTag::Cauchy) {
            for &i in &f.nodes {
                touches_other[i] = true;
            }
        }
        let boundary: Vec<usize> = (0..nv).filter(|&i| on_boundary[i]).collect();
        let interior: Vec<usize> = (0..nv).filter(|&i| !on_boundary[i]).collect();
        let nb = boundary.len();
        let mut slot = vec![usize::MAX; nv];
        for (p, &i) in boundary.iter().enumerate() {
            slot[i] = p;
        }
        let cauchy_in_boundary: Vec<usize> = cauchy.iter().map(|&i| slot[i]).collect();

        let mut extension = DMatrix::zeros(nv, nb);
        for (p, &i) in boundary.iter().enumerate() {
            extension[(i, p)] = 1.0;
        }
        if !interior.is_empty() {
            let mut imap = vec![usize::MAX; nv];
            for (p, &i) in interior.iter().enumerate() {
                imap[i] = p;
            }
            let kii = k.submatrix(&imap, &imap, interior.len(), interior.len());
            let lu = BandedLu::factor(&kii)?;
            let kib = k.submatrix(&imap, &slot, interior.len(), nb).to_dense();
            let columns: Result<Vec<Vec<f64>>, StabilityError> = (0..nb)
                .into_par_iter()
                .map(|p| {
                    let rhs: Vec<f64> = kib.column(p).iter().map(|v| -v).collect();
                    Ok(lu.solve(&rhs)?)
                })
                .collect();
            for (p, col) in columns?.into_iter().enumerate() {
                for (q, &i) in interior.iter().enumerate() {
                    extension[(i, p)] = col[q];
                }
            }
        }

        let mut ke = DMatrix::zeros(nv, nb);
        for p in 0..nb {
            let col: Vec<f64> = extension.column(p).iter().copied().collect();
            let kc = k.matvec(&col);
            ke.column_mut(p).copy_from_slice(&kc);
        }
        let energy = extension.transpose() * &ke;

        let nc = cauchy.len();
        let mut cslot = vec![usize::MAX; nv];
        for (p, &i) in cauchy.iter().enumerate() {
            cslot[i] = p;
        }
        let mut boundary_mass = DMatrix::zeros(nc, nc);
        let df = d as f64;
        for f in mesh.boundary().iter().filter(|f| f.tag == BoundaryTag::Cauchy) {
            let m = mesh.facet_measure(&f.nodes) / (df * (df + 1.0));
            for &a in &f.nodes {
                for &b in &f.nodes {
                    boundary_mass[(cslot[a], cslot[b])] += if a == b { 2.0 * m } else { m };
                }
            }
        }
        let lumped_all: Vec<f64> = (0..nc).map(|p| boundary_mass.row(p).sum()).collect();

        let flux_vertices: Vec<usize> = (0..nc).filter(|&p| !touches_other[cauchy[p]]).collect();
        let mut flux_rows = DMatrix::zeros(flux_vertices.len(), nb);
        let mut lumped = Vec::with_capacity(flux_vertices.len());
        for (r, &p) in flux_vertices.iter().enumerate() {
            let w = lumped_all[p].sqrt();
            for q in 0..nb {
                flux_rows[(r, q)] = ke[(cauchy[p], q)] / w;
            }
            lumped.push(w);
        }

        let mut data_normal = flux_rows.transpose() * &flux_rows;
        for a in 0..nc {
            for b in 0..nc {
                data_normal[(cauchy_in_boundary[a], cauchy_in_boundary[b])] += boundary_mass[(a, b)];
            }
        }

        Ok(CauchyProblem {
            mesh,
            cauchy,
            boundary,
            extension,
            boundary_mass,
            data_normal,
            energy,
            flux_rows,
            flux_vertices,
            lumped,
            cauchy_in_boundary,
        })
    }

    pub fn mesh(&self) -> &Arc<SimplicialMesh> {
        &self.mesh
    }

    /// Γ₀ vertices, in the order used by [`CauchyData`].
    pub fn cauchy_vertices(&self) -> &[usize] {
        &self.cauchy
    }

    pub fn num_boundary(&self) -> usize {
        self.boundary.len()
    }

    /// Nodal trace and flux of known functions at the Γ₀ vertices.
    pub fn sample(&self, u: impl Fn(&[f64]) -> f64, flux: impl Fn(&[f64]) -> f64) -> CauchyData {
        CauchyData {
            trace: self.cauchy.iter().map(|&i| u(self.mesh.vertex(i))).collect(),
            flux: self.cauchy.iter().map(|&i| flux(self.mesh.vertex(i))).collect(),
        }
    }

    /// L²(Γ₀) norm of nodal values on the Cauchy vertices.
    pub fn boundary_norm(&self, v: &[f64]) -> f64 {
        let x = DVector::from_column_slice(v);
        (x.dot(&(&self.boundary_mass * &x))).max(0.0).sqrt()
    }

    fn data_rhs(&self, data: &CauchyData) -> Result<DVector<f64>, StabilityError> {
        let nc = self.cauchy.len();
        if data.trace.len() != nc || data.flux.len() != nc {
            return Err(StabilityError::InvalidArgument(format!("data must have {nc} entries")));
        }
        let f = DVector::from_column_slice(&data.trace);
        let g = DVector::from_column_slice(&data.flux);
        let mf = &self.boundary_mass * f;
        let mg = &self.boundary_mass * g;
        let target = DVector::from_iterator(
            self.flux_vertices.len(),
            self.flux_vertices.iter().zip(&self.lumped).map(|(&p, w)| mg[p] / w),
        );
        let mut rhs = self.flux_rows.transpose() * target;
        for (a, &p) in self.cauchy_in_boundary.iter().enumerate() {
            rhs[p] += mf[a];
        }
        Ok(rhs)
    }

    /// Regularized completion; returns the full nodal field.
    pub fn solve(&self, data: &CauchyData, reg: f64) -> Result<DiscreteField, StabilityError> {
        if !(reg > 0.0) {
            return Err(StabilityError::InvalidArgument("reg weight must be positive".into()));
        }
        let rhs = self.data_rhs(data)?;
        let normal = &self.data_normal + &self.energy * reg;
        let chol = Cholesky::new(normal).ok_or(StabilityError::SingularNormalEquations)?;
        let ub = chol.solve(&rhs);
        let u = &self.extension * ub;
        Ok(DiscreteField::new(self.mesh.clone(), u.iter().copied().collect())?)
    }

    /// Data misfit and Dirichlet seminorm of a completion, for L-curves.
    pub fn misfit(&self, u: &DiscreteField, data: &CauchyData) -> Result<(f64, f64), StabilityError> {
        let ub = DVector::from_iterator(self.boundary.len(), self.boundary.iter().map(|&i| u.values()[i]));
        let rhs = self.data_rhs(data)?;
        // ‖data residual‖² = uᵀAu − 2uᵀr + const; the constant is added below.
        let f = DVector::from_column_slice(&data.trace);
        let g = DVector::from_column_slice(&data.flux);
        let mg = &self.boundary_mass * g;
        let target_norm: f64 = self
            .flux_vertices
            .iter()
            .zip(&self.lumped)
            .map(|(&p, w)| (mg[p] / w).powi(2))
            .sum();
        let constant = f.dot(&(&self.boundary_mass * &f)) + target_norm;
        let residual = ub.dot(&(&self.data_normal * &ub)) - 2.0 * ub.dot(&rhs) + constant;
        let seminorm = ub.dot(&(&self.energy * &ub)).max(0.0).sqrt();
        Ok((residual.max(0.0).sqrt(), seminorm))
    }
}

/// One-shot completion, see [`CauchyProblem`].
pub fn cauchy_complete(
    mesh: Arc<SimplicialMesh>,
    op: &EllipticOperator,
    data: &CauchyData,
    reg: f64,
) -> Result<DiscreteField, StabilityError> {
    CauchyProblem::new(mesh, op)?.solve(data, reg)
}

/// Unit square with Cauchy data on the bottom side; the rest is inaccessible.
pub fn cauchy_mesh(h: f64) -> Result<SimplicialMesh, StabilityError> {
    Ok(build_rect_mesh_tagged(&Domain::unit_square(), h, |x| {
        if x[1] < 1e-12 {
            BoundaryTag::Cauchy
        } else {
            BoundaryTag::Inaccessible
        }
    })?)
}

/// u* = cos(πx)e^{−πy} and its outward flux on the bottom side.
pub fn manufactured_cauchy() -> (fn(&[f64]) -> f64, fn(&[f64]) -> f64) {
    fn u(x: &[f64]) -> f64 {
        (PI * x[0]).cos() * (-PI * x[1]).exp()
    }
    fn flux(x: &[f64]) -> f64 {
        PI * (PI * x[0]).cos() * (-PI * x[1]).exp()
    }
    (u, flux)
}

/// Adds Gaussian noise of relative L²(Γ₀) size δ to trace and flux.
pub fn noisy_cauchy_data(problem: &CauchyProblem, exact: &CauchyData, delta: f64, rng: &mut ChaCha8Rng) -> CauchyData {
    let mut perturb = |v: &[f64]| -> Vec<f64> {
        let noise: Vec<f64> = v.iter().map(|_| StandardNormal.sample(&mut *rng)).collect();
        let (size, nsize) = (problem.boundary_norm(v), problem.boundary_norm(&noise));
        if delta == 0.0 || size == 0.0 || nsize == 0.0 {
            return v.to_vec();
        }
        let s = delta * size / nsize;
        v.iter().zip(&noise).map(|(a, n)| a + s * n).collect()
    };
    CauchyData {
        trace: perturb(&exact.trace),
        flux: perturb(&exact.flux),
    }
}

/// Regularization weight as a function of the noise level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum RegRule {
    Fixed { value: f64 },
    /// factor·δ^power, floored at `min`.
    Power { factor: f64, power: f64, min: f64 },
}

impl RegRule {
    pub fn weight(&self, delta: f64) -> f64 {
        match *self {
            RegRule::Fixed { value } => value,
            RegRule::Power { factor, power, min } => (factor * delta.powf(power)).max(min),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CauchySweepConfig {
    pub h: f64,
    pub deltas: Vec<f64>,
    pub seeds: u64,
    pub master_seed: u64,
    pub reg: RegRule,
    /// Geometric reg grid for the L-curve report.
    pub lcurve: Vec<f64>,
}

impl Default for CauchySweepConfig {
    fn default() -> Self {
        CauchySweepConfig {
            h: 1.0 / 32.0,
            deltas: (0..7).map(|k| 10f64.powf(-1.0 - 0.5 * k as f64)).collect(),
            seeds: 10,
            master_seed: 0,
            reg: RegRule::Power {
                factor: 1.0,
                power: 1.0,
                min: 1e-12,
            },
            lcurve: (0..13).map(|k| 10f64.powi(-k)).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CauchyRow {
    pub delta: f64,
    pub seed: u64,
    pub reg: f64,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LCurvePoint {
    pub reg: f64,
    pub residual: f64,
    pub seminorm: f64,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CauchySweep {
    pub rows: Vec<CauchyRow>,
    /// Error with exact data at the smallest swept reg weight.
    pub floor: f64,
    pub fit: StabilityFit,
    pub power_fit: StabilityFit,
    /// L-curve at the median noise level, first seed.
    pub lcurve_delta: f64,
    pub lcurve: Vec<LCurvePoint>,
    /// Reg weight at the point farthest from the chord of the log-log curve.
    pub lcurve_corner: f64,
}

impl CauchySweep {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("delta,seed,reg,error\n");
        for r in &self.rows {
            s.push_str(&format!("{},{},{},{}\n", r.delta, r.seed, r.reg, r.error));
        }
        s
    }
}

/// Relative L² error on the lower half y < 1/2 against the nodal interpolant.
pub fn lower_half_error(u: &DiscreteField, exact: impl Fn(&[f64]) -> f64) -> f64 {
    let mesh = u.mesh();
    let reference: Vec<f64> = (0..mesh.num_vertices()).map(|i| exact(mesh.vertex(i))).collect();
    let diff: Vec<f64> = u.values().iter().zip(&reference).map(|(a, b)| a - b).collect();
    let (mut e, mut r) = (0.0, 0.0);
    for c in 0..mesh.num_cells() {
        if mesh.cell_centroid(c)[1] < 0.5 {
            e += cell_l2_squared(mesh, c, &diff);
            r += cell_l2_squared(mesh, c, &reference);
        }
    }
    (e / r).sqrt()
}

/// Noise sweep for the Laplace Cauchy problem on the unit square with the
/// manufactured solution, followed by stability-modulus fits.
pub fn cauchy_sweep(config: &CauchySweepConfig) -> Result<CauchySweep, StabilityError> {
    if config.deltas.iter().any(|d| !(*d > 0.0 && *d < 1.0)) || config.seeds == 0 {
        return Err(StabilityError::InvalidArgument("need δ ∈ (0, 1) and at least one seed".into()));
    }
    let mesh = Arc::new(cauchy_mesh(config.h)?);
    let op = EllipticOperator::laplace(2, OperatorForm::Divergence);
    let problem = CauchyProblem::new(mesh, &op)?;
    let (u, flux) = manufactured_cauchy();
    let exact = problem.sample(u, flux);

    let jobs: Vec<(usize, u64)> = (0..config.deltas.len())
        .flat_map(|i| (0..config.seeds).map(move |s| (i, s)))
        .collect();
    let rows: Result<Vec<CauchyRow>, StabilityError> = jobs
        .par_iter()
        .map(|&(i, seed)| {
            let delta = config.deltas[i];
            let mut rng = stream(config.master_seed, i as u64 * config.seeds + seed);
            let data = noisy_cauchy_data(&problem, &exact, delta, &mut rng);
            let reg = config.reg.weight(delta);
            let field = problem.solve(&data, reg)?;
            Ok(CauchyRow {
                delta,
                seed,
                reg,
                error: lower_half_error(&field, u),
            })
        })
        .collect();
    let rows = rows?;

    let smallest = config.lcurve.iter().copied().fold(f64::INFINITY, f64::min);
    let floor_reg = if smallest.is_finite() { smallest } else { 1e-12 };
    let floor = lower_half_error(&problem.solve(&exact, floor_reg)?, u);

    let pairs: Vec<(f64, f64)> = rows.iter().map(|r| (r.delta, r.error)).collect();
    let fit = stability_fit(&pairs, Modulus::PhiBeta)?;
    let power_fit = stability_fit(&pairs, Modulus::Power)?;

    let mut sorted = config.deltas.clone();
    sorted.sort_by(f64::total_cmp);
    let lcurve_delta = sorted[sorted.len() / 2];
    let li = config.deltas.iter().position(|d| *d == lcurve_delta).expect("present");
    let data = noisy_cauchy_data(&problem, &exact, lcurve_delta, &mut stream(config.master_seed, li as u64 * config.seeds));
    let mut lcurve = Vec::new();
    for &reg in &config.lcurve {
        let field = problem.solve(&data, reg)?;
        let (residual, seminorm) = problem.misfit(&field, &data)?;
        lcurve.push(LCurvePoint {
            reg,
            residual,
            seminorm,
            error: lower_half_error(&field, u),
        });
    }
    let lcurve_corner = corner(&lcurve);
    Ok(CauchySweep {
        rows,
        floor,
        fit,
        power_fit,
        lcurve_delta,
        lcurve,
        lcurve_corner,
    })
}

fn stream(master: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(index);
    rng
}

fn corner(points: &[LCurvePoint]) -> f64 {
    let logs: Vec<(f64, f64)> = points
        .iter()
        .map(|p| (p.residual.max(1e-300).ln(), p.seminorm.max(1e-300).ln()))
        .collect();
    if logs.len() < 3 {
        return points.first().map_or(f64::NAN, |p| p.reg);
    }
    let (a, b) = (logs[0], logs[logs.len() - 1]);
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len = (dx * dx + dy * dy).sqrt().max(1e-300);
    let best = logs
        .iter()
        .enumerate()
        .max_by(|x, y| {
            let dx_ = |p: &(f64, f64)| ((p.0 - a.0) * dy - (p.1 - a.1) * dx).abs() / len;
            dx_(x.1).total_cmp(&dx_(y.1))
        })
        .map(|(i, _)| i)
        .expect("nonempty");
    points[best].reg
}
