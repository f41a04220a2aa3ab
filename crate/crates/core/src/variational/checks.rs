use serde::Serialize;

use super::{DiscreteField, VariationalError};
use crate::geometry::SimplicialMesh;
use crate::linalg::CsrMatrix;

/// Which extremal bound applies to a discrete solution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MaxPrincipleForm {
    /// −Δu = 0: both extremes on the boundary.
    Harmonic,
    /// −Δu ≤ 0: the maximum on the boundary.
    Subsolution,
    /// −Δu ≥ 0: the minimum on the boundary.
    Supersolution,
    /// −Δu + u = f: min{inf_Γ u, inf f} ≤ u ≤ max{sup_Γ u, sup f}.
    ZeroOrder { source_min: f64, source_max: f64 },
}

#[derive(Debug, Clone, Serialize)]
pub struct ExtremeReport {
    pub form: MaxPrincipleForm,
    pub interior_max: f64,
    pub interior_min: f64,
    pub boundary_max: f64,
    pub boundary_min: f64,
    pub upper_bound: Option<f64>,
    pub lower_bound: Option<f64>,
    /// Bound minus extreme; negative values are violations.
    pub upper_margin: Option<f64>,
    pub lower_margin: Option<f64>,
    /// Every vertex attaining the global maximum (within tolerance).
    pub argmax: Vec<usize>,
    pub argmin: Vec<usize>,
    pub tolerance: f64,
    pub violated: bool,
}

/// Compares interior and boundary extremes of a discrete solution.
///
/// Boundary vertices are those on any boundary facet, whatever its tag.
pub fn weak_max_check(u: &DiscreteField, form: MaxPrincipleForm, tolerance: f64) -> ExtremeReport {
    let mesh = u.mesh();
    let on_boundary = mesh.boundary_vertex_mask();
    let (mut imax, mut imin) = (f64::NEG_INFINITY, f64::INFINITY);
    let (mut bmax, mut bmin) = (f64::NEG_INFINITY, f64::INFINITY);
    for (i, &v) in u.values().iter().enumerate() {
        if on_boundary[i] {
            bmax = bmax.max(v);
            bmin = bmin.min(v);
        } else {
            imax = imax.max(v);
            imin = imin.min(v);
        }
    }
    let (upper_bound, lower_bound) = match form {
        MaxPrincipleForm::Harmonic => (Some(bmax), Some(bmin)),
        MaxPrincipleForm::Subsolution => (Some(bmax), None),
        MaxPrincipleForm::Supersolution => (None, Some(bmin)),
        MaxPrincipleForm::ZeroOrder { source_min, source_max } => (Some(bmax.max(source_max)), Some(bmin.min(source_min))),
    };
    let has_interior = imax.is_finite();
    let upper_margin = upper_bound.filter(|_| has_interior).map(|b| b - imax);
    let lower_margin = lower_bound.filter(|_| has_interior).map(|b| imin - b);
    let violated = upper_margin.is_some_and(|m| m < -tolerance) || lower_margin.is_some_and(|m| m < -tolerance);
    let gmax = imax.max(bmax);
    let gmin = imin.min(bmin);
    let pick = |target: f64| -> Vec<usize> {
        let scale = tolerance.max(1e-14 * target.abs());
        (0..u.values().len()).filter(|&i| (u.values()[i] - target).abs() <= scale).collect()
    };
    ExtremeReport {
        form,
        interior_max: imax,
        interior_min: imin,
        boundary_max: bmax,
        boundary_min: bmin,
        upper_bound,
        lower_bound,
        upper_margin,
        lower_margin,
        argmax: pick(gmax),
        argmin: pick(gmin),
        tolerance,
        violated,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PoincareWirtingerReport {
    pub subset_measure: f64,
    pub domain_measure: f64,
    /// ‖f − M_E f‖ / (√(|Ω|/|E|)·‖∇f‖) per trial; zero for constant trials.
    pub ratios: Vec<f64>,
    pub empirical_constant: f64,
}

/// Empirical constant of the Poincaré–Wirtinger inequality with mean over E.
///
/// `E` is the union of cells whose centroid satisfies `in_subset`; trials are
/// vertex values. `stiffness` and `mass` are the full Laplace matrices.
pub fn poincare_wirtinger_check(
    mesh: &SimplicialMesh,
    stiffness: &CsrMatrix,
    mass: &CsrMatrix,
    in_subset: impl Fn(&[f64]) -> bool,
    trials: &[Vec<f64>],
) -> Result<PoincareWirtingerReport, VariationalError> {
    let cells: Vec<usize> = (0..mesh.num_cells()).filter(|&c| in_subset(&mesh.cell_centroid(c))).collect();
    let subset_measure: f64 = cells.iter().map(|&c| mesh.cell_measure(c)).sum();
    if !(subset_measure > 0.0) {
        return Err(VariationalError::EmptySubset);
    }
    let domain_measure = mesh.total_measure();
    let mut ratios = Vec::with_capacity(trials.len());
    for f in trials {
        if f.len() != mesh.num_vertices() {
            return Err(VariationalError::DimensionMismatch {
                expected: mesh.num_vertices(),
                actual: f.len(),
            });
        }
        let integral: f64 = cells
            .iter()
            .map(|&c| {
                let cell = mesh.cell(c);
                mesh.cell_measure(c) * cell.iter().map(|&i| f[i]).sum::<f64>() / cell.len() as f64
            })
            .sum();
        let mean = integral / subset_measure;
        let centered: Vec<f64> = f.iter().map(|v| v - mean).collect();
        let num = mass.bilinear(&centered, &centered).max(0.0).sqrt();
        let grad = stiffness.bilinear(f, f).max(0.0).sqrt();
        let ratio = if grad > 0.0 {
            num / ((domain_measure / subset_measure).sqrt() * grad)
        } else {
            0.0
        };
        ratios.push(ratio);
    }
    let empirical_constant = ratios.iter().copied().fold(0.0, f64::max);
    Ok(PoincareWirtingerReport {
        subset_measure,
        domain_measure,
        ratios,
        empirical_constant,
    })
}

/// ∫_Ω f + ∫_Γ g for a pure Neumann problem −Δu = f, ∂_ν u = g.
///
/// The problem is solvable only when this vanishes; it is reported, never
/// solved.
pub fn compatibility_defect(mesh: &SimplicialMesh, f: impl Fn(&[f64]) -> f64, g: impl Fn(&[f64]) -> f64) -> f64 {
    let volume: f64 = (0..mesh.num_cells())
        .map(|c| mesh.cell_measure(c) * f(&mesh.cell_centroid(c)))
        .sum();
    let surface: f64 = mesh
        .boundary_facets()
        .iter()
        .map(|nodes| mesh.facet_measure(nodes) * g(&mesh.facet_midpoint(nodes)))
        .sum();
    volume + surface
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_rect_mesh, Domain};
    use crate::operators::{EllipticOperator, OperatorForm};
    use crate::variational::{assemble, solve, BoundaryData};
    use std::sync::Arc;

    fn unit_mesh(h: f64) -> Arc<SimplicialMesh> {
        Arc::new(build_rect_mesh(&Domain::unit_square(), h).unwrap())
    }

    #[test]
    fn affine_data_extremes_on_boundary() {
        let mesh = unit_mesh(0.1);
        let op = EllipticOperator::laplace(2, OperatorForm::Divergence);
        let data = BoundaryData::default().with_dirichlet(|x| 1.0 + x[0] - 2.0 * x[1]);
        let u = solve(&assemble(mesh, &op, |_| 0.0, &data).unwrap()).unwrap();
        let rep = weak_max_check(&u, MaxPrincipleForm::Harmonic, 1e-9);
        assert!(!rep.violated);
        assert!((rep.boundary_max - 2.0).abs() < 1e-12);
        assert!(rep.interior_max < rep.boundary_max);
    }

    #[test]
    fn negative_source_keeps_solution_nonpositive() {
        let mesh = unit_mesh(0.1);
        let op = EllipticOperator::laplace(2, OperatorForm::Divergence);
        let data = BoundaryData::default().with_dirichlet(|x| -x[0] * x[0]);
        let u = solve(&assemble(mesh, &op, |_| -1.0, &data).unwrap()).unwrap();
        let rep = weak_max_check(&u, MaxPrincipleForm::Subsolution, 1e-9);
        assert!(!rep.violated && rep.interior_max <= 1e-9);
    }

    #[test]
    fn ties_report_every_argmax() {
        let mesh = unit_mesh(0.5);
        let u = DiscreteField::interpolate(mesh, |_| 3.0);
        let rep = weak_max_check(&u, MaxPrincipleForm::Harmonic, 1e-12);
        assert_eq!(rep.argmax.len(), 9);
    }

    #[test]
    fn poincare_wirtinger_left_half() {
        let mesh = unit_mesh(1.0 / 16.0);
        let op = EllipticOperator::laplace(2, OperatorForm::Divergence);
        let sys = assemble(mesh.clone(), &op, |_| 0.0, &BoundaryData::default()).unwrap();
        let x1: Vec<f64> = (0..mesh.num_vertices()).map(|i| mesh.vertex(i)[0]).collect();
        let constant = vec![2.0; mesh.num_vertices()];
        let rep =
            poincare_wirtinger_check(&mesh, sys.full_stiffness(), sys.full_mass(), |x| x[0] < 0.5, &[x1, constant])
                .unwrap();
        // Closed form: mean over E is 1/4, ‖x − 1/4‖² = 7/48, ‖∇x‖ = 1, √(|Ω|/|E|) = √2.
        let exact = (7.0f64 / 48.0).sqrt() / 2f64.sqrt();
        assert!((rep.ratios[0] - exact).abs() < 1e-12);
        assert_eq!(rep.ratios[1], 0.0);
        assert!(matches!(
            poincare_wirtinger_check(&mesh, sys.full_stiffness(), sys.full_mass(), |_| false, &[]),
            Err(VariationalError::EmptySubset)
        ));
    }

    #[test]
    fn compatibility_of_pure_neumann_data() {
        let mesh = unit_mesh(0.25);
        assert!(compatibility_defect(&mesh, |_| 1.0, |_| -0.25).abs() < 1e-14);
        assert!((compatibility_defect(&mesh, |_| 1.0, |_| 0.0) - 1.0).abs() < 1e-14);
    }
}
