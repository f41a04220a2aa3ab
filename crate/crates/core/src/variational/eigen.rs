use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use std::sync::Arc;

use super::{assemble, AssembledSystem, BoundaryData, DiscreteField, VariationalError};
use crate::geometry::{BoundaryTag, SimplicialMesh};
use crate::linalg::{BandedLu, CsrMatrix};
use crate::operators::{EllipticOperator, OperatorForm};

/// Smallest generalized eigenpairs `Kv = λMv` on the free unknowns.
#[derive(Debug, Clone, Serialize)]
pub struct Spectrum {
    pub eigenvalues: Vec<f64>,
    /// M-orthonormal eigenvectors on the free unknowns.
    pub vectors: Vec<Vec<f64>>,
    /// ‖Kv − λMv‖ / (λ‖Mv‖) per pair.
    pub residuals: Vec<f64>,
    pub tolerance: f64,
    pub iterations: usize,
}

impl Spectrum {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// Eigenvector `m` (zero-based) as a field, zero on Dirichlet vertices.
    pub fn eigenfunction(&self, system: &AssembledSystem, m: usize) -> DiscreteField {
        DiscreteField {
            mesh: system.mesh.clone(),
            values: system.extend_homogeneous(&self.vectors[m]),
        }
    }
}

const DEFAULT_TOLERANCE: f64 = 1e-8;
const MAX_ITERATIONS: usize = 2000;

/// The `k` smallest eigenpairs by block inverse iteration with Rayleigh–Ritz.
///
/// The block holds `min(n, 2k + 8)` vectors; each sweep applies `K⁻¹M`,
/// then projects onto the block. Converged when every requested pair has
/// relative residual at most 10⁻⁸.
pub fn eigensolve(system: &AssembledSystem, k: usize) -> Result<Spectrum, VariationalError> {
    eigensolve_with(system, k, DEFAULT_TOLERANCE, MAX_ITERATIONS)
}

pub fn eigensolve_with(
    system: &AssembledSystem,
    k: usize,
    tolerance: f64,
    max_iterations: usize,
) -> Result<Spectrum, VariationalError> {
    let n = system.num_free();
    if k == 0 || k > n {
        return Err(VariationalError::InvalidArgument(format!("need 1 ≤ k ≤ {n}, got {k}")));
    }
    let (kmat, mmat) = (&system.stiffness, &system.mass);
    let defect = kmat.max_asymmetry();
    if defect > 1e-12 * kmat.max_abs() {
        return Err(VariationalError::NotSymmetric { defect });
    }
    let lu = BandedLu::factor(kmat)?;
    let p = n.min(2 * k + 8);
    let mut rng = ChaCha8Rng::seed_from_u64(0x00e1_1e57);
    let mut x = DMatrix::from_fn(n, p, |_, _| rng.gen_range(-1.0..1.0));
    let mut worst = f64::INFINITY;
    for it in 1..=max_iterations {
        let mx = apply_columns(mmat, &x);
        let cols: Vec<Vec<f64>> = (0..p)
            .into_par_iter()
            .map(|j| lu.solve(mx.column(j).as_slice()))
            .collect::<Result<_, _>>()?;
        let y = DMatrix::from_fn(n, p, |i, j| cols[j][i]);
        let (values, rotated) = rayleigh_ritz(kmat, mmat, &y)?;
        x = rotated;
        let residuals = residuals(kmat, mmat, &x, &values, k);
        worst = residuals.iter().copied().fold(0.0, f64::max);
        if worst <= tolerance {
            let vectors = (0..k).map(|j| normalized_sign(x.column(j).iter().copied().collect())).collect();
            return Ok(Spectrum {
                eigenvalues: values[..k].to_vec(),
                vectors,
                residuals,
                tolerance,
                iterations: it,
            });
        }
    }
    Err(VariationalError::ConvergenceFailure {
        iterations: max_iterations,
        residual: worst,
    })
}

fn apply_columns(a: &CsrMatrix, x: &DMatrix<f64>) -> DMatrix<f64> {
    let cols: Vec<Vec<f64>> = (0..x.ncols())
        .into_par_iter()
        .map(|j| a.matvec(x.column(j).as_slice()))
        .collect();
    DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| cols[j][i])
}

/// Ritz values (ascending) and M-orthonormal Ritz vectors of the span of `y`.
fn rayleigh_ritz(k: &CsrMatrix, m: &CsrMatrix, y: &DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>), VariationalError> {
    let ky = apply_columns(k, y);
    let my = apply_columns(m, y);
    let kr = symmetrize(y.transpose() * ky);
    let mr = symmetrize(y.transpose() * my);
    let (values, q) = generalized_symmetric(&kr, &mr)?;
    Ok((values, y * q))
}

fn symmetrize(a: DMatrix<f64>) -> DMatrix<f64> {
    (&a + a.transpose()) * 0.5
}

/// Eigenpairs of `A q = λ B q` with B symmetric positive definite, ascending.
pub(crate) fn generalized_symmetric(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>), VariationalError> {
    let eb = SymmetricEigen::new(b.clone());
    let top = eb.eigenvalues.iter().copied().fold(0.0, f64::max);
    if eb.eigenvalues.iter().any(|&d| !(d > 1e-14 * top)) {
        return Err(VariationalError::ZeroVector);
    }
    let w = DMatrix::from_fn(b.nrows(), b.ncols(), |i, j| eb.eigenvectors[(i, j)] / eb.eigenvalues[j].sqrt());
    let c = symmetrize(w.transpose() * a * &w);
    let ec = SymmetricEigen::new(c);
    let mut order: Vec<usize> = (0..ec.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| ec.eigenvalues[i].total_cmp(&ec.eigenvalues[j]));
    let values = order.iter().map(|&i| ec.eigenvalues[i]).collect();
    let z = DMatrix::from_fn(a.nrows(), order.len(), |i, j| ec.eigenvectors[(i, order[j])]);
    Ok((values, w * z))
}

fn residuals(k: &CsrMatrix, m: &CsrMatrix, x: &DMatrix<f64>, values: &[f64], count: usize) -> Vec<f64> {
    (0..count)
        .map(|j| {
            let v = x.column(j);
            let kv = k.matvec(v.as_slice());
            let mv = m.matvec(v.as_slice());
            let r: f64 = kv.iter().zip(&mv).map(|(a, b)| (a - values[j] * b).powi(2)).sum::<f64>().sqrt();
            let scale = values[j].abs() * mv.iter().map(|b| b * b).sum::<f64>().sqrt();
            if scale > 0.0 {
                r / scale
            } else {
                f64::INFINITY
            }
        })
        .collect()
}

/// Fixes the sign so that the entry of largest magnitude is positive.
fn normalized_sign(mut v: Vec<f64>) -> Vec<f64> {
    let big = v.iter().copied().fold(0.0f64, |m, a| if a.abs() > m.abs() { a } else { m });
    if big < 0.0 {
        v.iter_mut().for_each(|a| *a = -*a);
    }
    v
}

/// a(v,v)/(v|v) for a vector on the free unknowns.
pub fn rayleigh(system: &AssembledSystem, v: &[f64]) -> Result<f64, VariationalError> {
    if v.len() != system.num_free() {
        return Err(VariationalError::DimensionMismatch {
            expected: system.num_free(),
            actual: v.len(),
        });
    }
    let den = system.mass.bilinear(v, v);
    if !(den > 0.0) {
        return Err(VariationalError::ZeroVector);
    }
    Ok(system.stiffness.bilinear(v, v) / den)
}

#[derive(Debug, Clone, Serialize)]
pub struct MinMaxReport {
    pub m: usize,
    pub lambda_m: f64,
    /// max of the Rayleigh quotient over the span of the first m eigenvectors.
    pub eigen_span_max: f64,
    pub eigen_span_defect: f64,
    /// max of the Rayleigh quotient over each trial subspace.
    pub trial_maxima: Vec<f64>,
    /// Smallest (trial max − λ_m)/λ_m.
    pub min_relative_margin: f64,
    pub tolerance: f64,
    pub holds: bool,
}

/// Checks the min-max characterization of λ_m against trial subspaces.
///
/// Each trial is a list of `m` vectors on the free unknowns; the maximum of
/// the Rayleigh quotient over its span is the largest eigenvalue of the
/// projected pencil.
pub fn min_max_check(
    system: &AssembledSystem,
    spectrum: &Spectrum,
    m: usize,
    trials: &[Vec<Vec<f64>>],
) -> Result<MinMaxReport, VariationalError> {
    if !system.has_dirichlet() {
        return Err(VariationalError::DirichletRequired);
    }
    if m == 0 || m > spectrum.len() {
        return Err(VariationalError::InvalidArgument(format!("need 1 ≤ m ≤ {}", spectrum.len())));
    }
    let lambda_m = spectrum.eigenvalues[m - 1];
    let eigen_span_max = subspace_max(system, &spectrum.vectors[..m])?;
    let mut trial_maxima = Vec::with_capacity(trials.len());
    for basis in trials {
        if basis.len() != m {
            return Err(VariationalError::InvalidArgument(format!("trial of dimension {} for m = {m}", basis.len())));
        }
        trial_maxima.push(subspace_max(system, basis)?);
    }
    let tolerance = spectrum.tolerance;
    let min_relative_margin = trial_maxima
        .iter()
        .map(|t| (t - lambda_m) / lambda_m)
        .fold(f64::INFINITY, f64::min);
    let eigen_span_defect = (eigen_span_max - lambda_m).abs() / lambda_m;
    let holds = eigen_span_defect <= tolerance && trial_maxima.iter().all(|t| *t >= lambda_m * (1.0 - tolerance));
    Ok(MinMaxReport {
        m,
        lambda_m,
        eigen_span_max,
        eigen_span_defect,
        trial_maxima,
        min_relative_margin,
        tolerance,
        holds,
    })
}

fn subspace_max(system: &AssembledSystem, basis: &[Vec<f64>]) -> Result<f64, VariationalError> {
    let m = basis.len();
    let n = system.num_free();
    if basis.iter().any(|v| v.len() != n) {
        return Err(VariationalError::DimensionMismatch {
            expected: n,
            actual: basis.iter().map(Vec::len).find(|&l| l != n).unwrap_or(n),
        });
    }
    let kr = DMatrix::from_fn(m, m, |i, j| system.stiffness.bilinear(&basis[i], &basis[j]));
    let mr = DMatrix::from_fn(m, m, |i, j| system.mass.bilinear(&basis[i], &basis[j]));
    let (values, _) = generalized_symmetric(&symmetrize(kr), &symmetrize(mr))?;
    Ok(*values.last().unwrap())
}

#[derive(Debug, Clone, Serialize)]
pub struct PoincareReport {
    /// Best constant C in ‖u‖² ≤ C‖∇u‖², equal to 1/λ₁.
    pub constant: f64,
    pub lambda1: f64,
    /// Smallest bounding-box side a.
    pub width: f64,
    /// Strip bound (a/2)².
    pub strip_bound: f64,
    /// Elementary one-dimensional bound a²/8.
    pub elementary_bound: f64,
}

/// Poincaré constant of the mesh domain with zero Dirichlet data everywhere.
pub fn poincare_constant(mesh: &SimplicialMesh) -> Result<PoincareReport, VariationalError> {
    let mut m = mesh.clone();
    m.retag(|_| BoundaryTag::Dirichlet);
    let op = EllipticOperator::laplace(m.dim(), OperatorForm::Divergence);
    let width = (0..m.dim())
        .map(|d| {
            let coords = (0..m.num_vertices()).map(|i| m.vertex(i)[d]);
            let (lo, hi) = coords.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), c| (a.min(c), b.max(c)));
            hi - lo
        })
        .fold(f64::INFINITY, f64::min);
    let system = assemble(Arc::new(m), &op, |_| 0.0, &BoundaryData::default())?;
    let lambda1 = eigensolve(&system, 1)?.eigenvalues[0];
    Ok(PoincareReport {
        constant: 1.0 / lambda1,
        lambda1,
        width,
        strip_bound: 0.25 * width * width,
        elementary_bound: width * width / 8.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_rect_mesh, Domain};
    use std::f64::consts::PI;

    fn dirichlet_laplace(domain: &Domain, h: f64) -> AssembledSystem {
        let mesh = Arc::new(build_rect_mesh(domain, h).unwrap());
        let op = EllipticOperator::laplace(domain.dim(), OperatorForm::Divergence);
        assemble(mesh, &op, |_| 0.0, &BoundaryData::default()).unwrap()
    }

    #[test]
    fn interval_spectrum() {
        let sys = dirichlet_laplace(&Domain::interval(0.0, 1.0).unwrap(), 1.0 / 256.0);
        let s = eigensolve(&sys, 4).unwrap();
        for (k, l) in s.eigenvalues.iter().enumerate() {
            let exact = ((k + 1) as f64 * PI).powi(2);
            assert!((l - exact).abs() / exact < 0.01);
        }
        assert!(s.residuals.iter().all(|r| *r <= 1e-8));
        let r1 = rayleigh(&sys, &s.vectors[0]).unwrap();
        assert!((r1 - s.eigenvalues[0]).abs() < 1e-9 * r1);
        let doubled: Vec<f64> = s.vectors[1].iter().map(|v| 2.0 * v).collect();
        assert!((rayleigh(&sys, &doubled).unwrap() - s.eigenvalues[1]).abs() < 1e-9 * s.eigenvalues[1]);
    }

    #[test]
    fn eigenvectors_are_mass_orthonormal() {
        let sys = dirichlet_laplace(&Domain::rectangle(&[0.0, 0.0], &[2.0, 1.0]).unwrap(), 0.1);
        let s = eigensolve(&sys, 3).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let g = sys.mass.bilinear(&s.vectors[i], &s.vectors[j]);
                assert!((g - if i == j { 1.0 } else { 0.0 }).abs() < 1e-10);
            }
        }
        assert!(s.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn min_max_on_eigen_span_and_random_trials() {
        let sys = dirichlet_laplace(&Domain::unit_square(), 0.125);
        let s = eigensolve(&sys, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let trials: Vec<Vec<Vec<f64>>> = (0..5)
            .map(|_| (0..3).map(|_| (0..sys.num_free()).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect())
            .collect();
        let rep = min_max_check(&sys, &s, 3, &trials).unwrap();
        assert!(rep.holds);
        assert!(rep.eigen_span_defect < 1e-8);
    }

    #[test]
    fn min_max_requires_dirichlet() {
        let mesh = Arc::new(
            crate::geometry::build_rect_mesh_tagged(&Domain::unit_square(), 0.25, |_| BoundaryTag::Neumann).unwrap(),
        );
        let op = EllipticOperator::laplace(2, OperatorForm::Divergence).with_potential(|_| 1.0);
        let sys = assemble(mesh, &op, |_| 0.0, &BoundaryData::default()).unwrap();
        let s = eigensolve(&sys, 1).unwrap();
        assert_eq!(min_max_check(&sys, &s, 1, &[]).unwrap_err(), VariationalError::DirichletRequired);
    }

    #[test]
    fn poincare_constant_of_interval_and_scaling() {
        let mesh = build_rect_mesh(&Domain::interval(0.0, 1.0).unwrap(), 1.0 / 128.0).unwrap();
        let r = poincare_constant(&mesh).unwrap();
        assert!((r.constant - 1.0 / (PI * PI)).abs() < 0.01 / (PI * PI));
        assert!(r.strip_bound >= r.constant && r.elementary_bound >= r.constant);
        let r2 = poincare_constant(&mesh.scaled(2.0)).unwrap();
        assert!((r2.constant / r.constant - 4.0).abs() < 1e-9);
    }

    #[test]
    fn rayleigh_rejects_zero() {
        let sys = dirichlet_laplace(&Domain::unit_square(), 0.25);
        assert_eq!(rayleigh(&sys, &vec![0.0; sys.num_free()]).unwrap_err(), VariationalError::ZeroVector);
    }
}
