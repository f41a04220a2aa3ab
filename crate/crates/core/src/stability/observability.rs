use serde::Serialize;

use super::StabilityError;
use crate::geometry::SimplicialMesh;
use crate::linalg::linear_fit;
use crate::variational::{AssembledSystem, Spectrum};

/// ∫_T u² for the P1 interpolant on cell `c`:
/// |T|/((d+1)(d+2))·(Σu_i² + (Σu_i)²).
pub fn cell_l2_squared(mesh: &SimplicialMesh, c: usize, values: &[f64]) -> f64 {
    let d = mesh.dim() as f64;
    let cell = mesh.cell(c);
    let sum: f64 = cell.iter().map(|&i| values[i]).sum();
    let squares: f64 = cell.iter().map(|&i| values[i] * values[i]).sum();
    mesh.cell_measure(c) / ((d + 1.0) * (d + 2.0)) * (squares + sum * sum)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ObservabilityReport {
    pub cells_in_subdomain: usize,
    pub eigenvalues: Vec<f64>,
    /// ‖φ_m‖_{L²(ω)} / ‖φ_m‖_{L²(Ω)}.
    pub ratios: Vec<f64>,
    /// Fit −ln ratio ≈ κ√λ + c0; NaN with fewer than two eigenpairs.
    pub kappa: f64,
    pub intercept: f64,
    pub rms: f64,
}

impl ObservabilityReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("index,lambda,sqrt_lambda,ratio,neg_log_ratio\n");
        for (m, (l, r)) in self.eigenvalues.iter().zip(&self.ratios).enumerate() {
            s.push_str(&format!("{m},{l},{},{r},{}\n", l.sqrt(), -r.ln()));
        }
        s
    }
}

/// Localized mass of each eigenfunction on ω, the union of cells whose
/// centroid satisfies `in_omega`.
pub fn observability_ratio(
    system: &AssembledSystem,
    spectrum: &Spectrum,
    in_omega: impl Fn(&[f64]) -> bool,
) -> Result<ObservabilityReport, StabilityError> {
    let mesh = system.mesh();
    let inside: Vec<bool> = (0..mesh.num_cells()).map(|c| in_omega(&mesh.cell_centroid(c))).collect();
    let count = inside.iter().filter(|b| **b).count();
    if count == 0 {
        return Err(StabilityError::SubdomainUnresolved);
    }
    let mut ratios = Vec::with_capacity(spectrum.len());
    for m in 0..spectrum.len() {
        let phi = spectrum.eigenfunction(system, m);
        let (mut part, mut whole) = (0.0, 0.0);
        for (c, &is_in) in inside.iter().enumerate() {
            let q = cell_l2_squared(mesh, c, phi.values());
            whole += q;
            if is_in {
                part += q;
            }
        }
        if !(whole > 0.0) {
            return Err(StabilityError::DegenerateField);
        }
        ratios.push((part / whole).sqrt());
    }
    let (kappa, intercept, rms) = if ratios.len() >= 2 {
        let x: Vec<f64> = spectrum.eigenvalues.iter().map(|l| l.sqrt()).collect();
        let y: Vec<f64> = ratios.iter().map(|r| -r.ln()).collect();
        linear_fit(&x, &y)
    } else {
        (f64::NAN, f64::NAN, f64::NAN)
    };
    Ok(ObservabilityReport {
        cells_in_subdomain: count,
        eigenvalues: spectrum.eigenvalues.clone(),
        ratios,
        kappa,
        intercept,
        rms,
    })
}
