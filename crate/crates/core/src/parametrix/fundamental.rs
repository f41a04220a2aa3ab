use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;
use std::fmt::Write as _;

use super::nystrom::RowBuilder;
use super::{
    check_support, covering_radius, factor_fredholm, nystrom_assemble, polar_integral, DefectDiagnostics, KernelGrid,
    KernelKind, Parametrix, ParametrixError, NEAR_RULE, TEST_RULE,
};
use crate::geometry::{Domain, Quadrature};
use crate::linalg::linear_fit;
use crate::operators::{apply_adjoint, Bump, ScalarField};
use crate::small::{ball_volume, dist};

/// Pole of a fundamental-solution column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", content = "index", rename_all = "snake_case")]
pub enum Target {
    /// A quadrature node.
    Node(usize),
    /// One of the extra off-node poles passed to [`solve_fundamental`].
    Point(usize),
}

/// F(x, y) = H(x, y) + ∫_Ω H(x, z)G(z, y)dz with G solving
/// G(x, y) − ∫K(x, z)G(z, y)dz = K(x, y), K = L_xH.
#[derive(Debug, Clone)]
pub struct FundamentalSolution {
    parametrix: Parametrix,
    domain: Domain,
    residual_grid: KernelGrid,
    parametrix_grid: KernelGrid,
    /// G at the nodes: one column per node pole, then one per extra pole.
    correction: DMatrix<f64>,
    extra: Vec<Vec<f64>>,
    /// None when K ≡ 0 and no system was solved.
    pub diagnostics: Option<DefectDiagnostics>,
}

/// Radius of the ball with the measure of a quadrature cell.
fn cell_radius(dim: usize, weight: f64) -> f64 {
    (weight / ball_volume(dim, 1.0)).powf(1.0 / dim as f64)
}

/// Values k(xᵢ, y). Where y falls inside the cell of node i the point value
/// is replaced by the average of k(·, y) over a ball of the cell's measure
/// about y.
fn pole_column(
    domain: &Domain,
    quad: &Quadrature,
    kernel: &(dyn Fn(&[f64], &[f64]) -> f64 + Sync),
    y: &[f64],
) -> Result<Vec<f64>, ParametrixError> {
    (0..quad.len())
        .map(|i| {
            let x = quad.node(i);
            let r = cell_radius(quad.dim(), quad.weight(i));
            if dist(x, y) >= 0.5 * r {
                return Ok(kernel(x, y));
            }
            let total = polar_integral(Some(domain), y, r, NEAR_RULE, &|z| kernel(z, y))?;
            let measure = polar_integral(Some(domain), y, r, NEAR_RULE, &|_| 1.0)?;
            Ok(total / measure)
        })
        .collect()
}

/// Builds the fundamental solution for every node pole and each extra pole.
///
/// Fails with `NontrivialDefect` when I − A is numerically singular.
pub fn solve_fundamental(
    parametrix: &Parametrix,
    domain: &Domain,
    quad: &Quadrature,
    extra_poles: &[Vec<f64>],
) -> Result<FundamentalSolution, ParametrixError> {
    let n = parametrix.dim();
    if quad.dim() != n || domain.dim() != n {
        return Err(ParametrixError::UnsupportedDimension(quad.dim()));
    }
    for i in 0..quad.len() {
        parametrix.frame(quad.node(i))?;
    }
    for y in extra_poles {
        if y.len() != n || !domain.contains(y) {
            return Err(ParametrixError::InvalidArgument("extra poles must be interior points".into()));
        }
        parametrix.frame(y)?;
    }
    let alpha = parametrix.operator().holder().map_or(1.0, |h| h.exponent.min(1.0));
    let kernel = |x: &[f64], y: &[f64]| parametrix.kernel(x, y).unwrap_or(f64::NAN);
    let green = |x: &[f64], y: &[f64]| parametrix.value(x, y).unwrap_or(f64::NAN);
    let residual_grid = nystrom_assemble(domain, quad, &kernel, KernelKind::Residual, alpha)?;
    let parametrix_grid = nystrom_assemble(domain, quad, &green, KernelKind::Parametrix, 2.0)?;
    let count = quad.len();
    let columns = count + extra_poles.len();
    let (correction, diagnostics) = if parametrix.kernel_vanishes() {
        (DMatrix::zeros(count, columns), None)
    } else {
        let system = factor_fredholm(&residual_grid)?;
        let poles: Vec<Vec<f64>> = (0..count).map(|m| quad.node(m).to_vec()).chain(extra_poles.iter().cloned()).collect();
        let cols: Vec<Vec<f64>> = poles
            .par_iter()
            .map(|y| pole_column(domain, quad, &kernel, y))
            .collect::<Result<_, _>>()?;
        let rhs = DMatrix::from_fn(count, columns, |i, j| cols[j][i]);
        if rhs.iter().any(|v| !v.is_finite()) {
            return Err(ParametrixError::InvalidArgument("kernel produced non-finite values".into()));
        }
        (system.solve(&rhs)?, Some(system.diagnostics))
    };
    Ok(FundamentalSolution {
        parametrix: parametrix.clone(),
        domain: domain.clone(),
        residual_grid,
        parametrix_grid,
        correction,
        extra: extra_poles.to_vec(),
        diagnostics,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FundamentalCheck {
    /// ∫F(x, y)L*φ(x)dx.
    pub integral: f64,
    pub phi_at_target: f64,
    /// |∫F L*φ + φ(y)|.
    pub defect: f64,
    pub relative: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GrowthReport {
    /// F − H vanishes at every node.
    pub identically_zero: bool,
    /// Fitted exponent s of |F − H| ~ |x − y|^s.
    pub exponent: Option<f64>,
    pub rms: Option<f64>,
    /// −n + 2, the exponent of H itself (logarithmic in 2D).
    pub reference: f64,
    pub samples: usize,
}

impl GrowthReport {
    /// True when the fit is no more singular than −n + 2 − slack.
    pub fn within(&self, slack: f64) -> bool {
        self.identically_zero || self.exponent.is_some_and(|s| s >= self.reference - slack)
    }
}

impl FundamentalSolution {
    pub fn parametrix(&self) -> &Parametrix {
        &self.parametrix
    }

    pub fn residual_grid(&self) -> &KernelGrid {
        &self.residual_grid
    }

    pub fn parametrix_grid(&self) -> &KernelGrid {
        &self.parametrix_grid
    }

    pub fn num_nodes(&self) -> usize {
        self.residual_grid.len()
    }

    pub fn pole(&self, t: Target) -> Result<&[f64], ParametrixError> {
        match t {
            Target::Node(m) if m < self.num_nodes() => Ok(self.residual_grid.node(m)),
            Target::Point(e) if e < self.extra.len() => Ok(&self.extra[e]),
            _ => Err(ParametrixError::InvalidArgument(format!("no pole {t:?}"))),
        }
    }

    fn column(&self, t: Target) -> Result<usize, ParametrixError> {
        self.pole(t)?;
        Ok(match t {
            Target::Node(m) => m,
            Target::Point(e) => self.num_nodes() + e,
        })
    }

    /// Correction density G(·, y) at the nodes.
    pub fn correction(&self, t: Target) -> Result<Vec<f64>, ParametrixError> {
        Ok(self.correction.column(self.column(t)?).iter().copied().collect())
    }

    /// F − H at the nodes.
    pub fn difference_at_nodes(&self, t: Target) -> Result<Vec<f64>, ParametrixError> {
        Ok(self.parametrix_grid.apply(&self.correction(t)?))
    }

    /// F(x, y) for an arbitrary x ≠ y in Ω.
    pub fn value(&self, x: &[f64], t: Target) -> Result<f64, ParametrixError> {
        let y = self.pole(t)?;
        let h = self.parametrix.value(x, y)?;
        let g = self.correction(t)?;
        if g.iter().all(|v| *v == 0.0) {
            return Ok(h);
        }
        let green = |a: &[f64], b: &[f64]| self.parametrix.value(a, b).unwrap_or(f64::NAN);
        let builder = RowBuilder {
            domain: &self.domain,
            dim: self.parametrix.dim(),
            nodes: self.parametrix_grid.nodes(),
            weights: self.parametrix_grid.weights(),
            kernel: &green,
            cutoff: self.parametrix_grid.cutoff(),
        };
        let (row, _) = builder.row(x)?;
        Ok(h + row.iter().zip(&g).map(|(r, v)| r * v).sum::<f64>())
    }

    /// ∫F(x, y)L*φ(x)dx, which should equal −φ(y).
    ///
    /// The H part is integrated in polar coordinates about y; the milder
    /// F − H part by the node quadrature.
    pub fn verify(&self, phi: &Bump, t: Target) -> Result<FundamentalCheck, ParametrixError> {
        check_support(&self.domain, phi)?;
        let y = self.pole(t)?.to_vec();
        let op = self.parametrix.operator();
        let failure = std::cell::RefCell::new(None);
        let singular = polar_integral(None, &y, covering_radius(phi, &y), TEST_RULE, &|x| {
            if dist(x, &phi.center) >= phi.radius {
                return 0.0;
            }
            let term = (|| -> Result<f64, ParametrixError> { Ok(self.parametrix.value(x, &y)? * apply_adjoint(op, phi, x)?) })();
            term.unwrap_or_else(|e| {
                failure.borrow_mut().get_or_insert(e);
                0.0
            })
        })?;
        if let Some(e) = failure.into_inner() {
            return Err(e);
        }
        let diff = self.difference_at_nodes(t)?;
        let mut regular = 0.0;
        for (i, d) in diff.iter().enumerate() {
            let x = self.residual_grid.node(i);
            if dist(x, &phi.center) < phi.radius {
                regular += self.residual_grid.weights()[i] * d * apply_adjoint(op, phi, x)?;
            }
        }
        let integral = singular + regular;
        let phi_y = phi.value(&y);
        let defect = (integral + phi_y).abs();
        Ok(FundamentalCheck {
            integral,
            phi_at_target: phi_y,
            defect,
            relative: defect / phi_y.abs(),
        })
    }

    /// Log-log fit of |F − H| against |x − y| over nodes outside 2δ of y.
    ///
    /// Distances are split into ten logarithmic bins and the largest value
    /// of each bin is fitted.
    pub fn growth(&self, t: Target) -> Result<GrowthReport, ParametrixError> {
        const BINS: usize = 10;
        let y = self.pole(t)?.to_vec();
        let diff = self.difference_at_nodes(t)?;
        let reference = 2.0 - self.parametrix.dim() as f64;
        if diff.iter().all(|v| *v == 0.0) {
            return Ok(GrowthReport {
                identically_zero: true,
                exponent: None,
                rms: None,
                reference,
                samples: diff.len(),
            });
        }
        let r_min = 2.0 * self.parametrix_grid.cutoff();
        let pairs: Vec<(f64, f64)> = (0..diff.len())
            .map(|i| (dist(self.residual_grid.node(i), &y), diff[i].abs()))
            .filter(|(d, _)| *d >= r_min)
            .collect();
        let r_max = pairs.iter().map(|p| p.0).fold(0.0, f64::max);
        let mut best = [(0.0f64, 0.0f64); BINS];
        if r_max > r_min {
            let width = (r_max / r_min).ln() / BINS as f64;
            for (d, v) in &pairs {
                let b = (((d / r_min).ln() / width) as usize).min(BINS - 1);
                if *v > best[b].1 {
                    best[b] = (*d, *v);
                }
            }
        }
        let used: Vec<(f64, f64)> = best.iter().filter(|p| p.1 > 0.0).map(|p| (p.0.ln(), p.1.ln())).collect();
        if used.len() < 5 {
            return Err(ParametrixError::InsufficientSamples {
                found: used.len(),
                required: 5,
            });
        }
        let (x, v): (Vec<f64>, Vec<f64>) = used.into_iter().unzip();
        let (slope, _, rms) = linear_fit(&x, &v);
        Ok(GrowthReport {
            identically_zero: false,
            exponent: Some(slope),
            rms: Some(rms),
            reference,
            samples: x.len(),
        })
    }

    /// CSV of H, F and F − H at the nodes for a fixed pole.
    pub fn to_csv(&self, t: Target) -> Result<String, ParametrixError> {
        let y = self.pole(t)?.to_vec();
        let n = self.parametrix.dim();
        let diff = self.difference_at_nodes(t)?;
        let axes = ["1", "2", "3"];
        let mut out = String::new();
        let xs: Vec<String> = axes[..n].iter().map(|a| format!("x{a}")).collect();
        let ys: Vec<String> = axes[..n].iter().map(|a| format!("y{a}")).collect();
        let _ = writeln!(out, "{},{},H,F,F_minus_H", xs.join(","), ys.join(","));
        for (i, d) in diff.iter().enumerate() {
            let x = self.residual_grid.node(i);
            let Ok(h) = self.parametrix.value(x, &y) else { continue };
            let coords: Vec<String> = x.iter().chain(&y).map(|v| v.to_string()).collect();
            let _ = writeln!(out, "{},{},{},{}", coords.join(","), h, h + d, d);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::disk_nystrom_quadrature;
    use crate::operators::{EllipticOperator, OperatorForm};
    use crate::small::diagonal;

    #[test]
    fn constant_coefficients_give_parametrix() {
        let op = EllipticOperator::constant(2, diagonal(&[2.0, 1.0]), OperatorForm::Nondivergence);
        let p = Parametrix::new(&op).unwrap();
        let disk = Domain::disk([0.0, 0.0], 0.5).unwrap();
        let quad = disk_nystrom_quadrature(&[0.0, 0.0], 0.5, 0.05).unwrap();
        let f = solve_fundamental(&p, &disk, &quad, &[vec![0.1, 0.05]]).unwrap();
        assert!(f.diagnostics.is_none());
        let x = [0.2, -0.1];
        assert_eq!(f.value(&x, Target::Point(0)).unwrap(), p.value(&x, &[0.1, 0.05]).unwrap());
        assert!(f.difference_at_nodes(Target::Node(3)).unwrap().iter().all(|v| *v == 0.0));
        assert!(f.growth(Target::Point(0)).unwrap().identically_zero);
    }

    #[test]
    fn absorbing_potential_matches_neumann_series() {
        let op = EllipticOperator::laplace(2, OperatorForm::Nondivergence).with_potential(|_| -50.0);
        let p = Parametrix::new(&op).unwrap();
        let disk = Domain::disk([0.0, 0.0], 0.1).unwrap();
        let quad = disk_nystrom_quadrature(&[0.0, 0.0], 0.1, 0.01).unwrap();
        let f = solve_fundamental(&p, &disk, &quad, &[vec![0.02, 0.01]]).unwrap();
        let diag = f.diagnostics.unwrap();
        assert!(diag.spectral_radius < 1.0, "{diag:?}");
        // Oracle: G = Σ_k A^k K by repeated application.
        let kernel = |x: &[f64], y: &[f64]| p.kernel(x, y).unwrap();
        let rhs = pole_column(&disk, &quad, &kernel, &[0.02, 0.01]).unwrap();
        let (mut term, mut series) = (rhs.clone(), rhs);
        for _ in 0..200 {
            term = f.residual_grid().apply(&term);
            for (s, t) in series.iter_mut().zip(&term) {
                *s += t;
            }
        }
        let g = f.correction(Target::Point(0)).unwrap();
        let scale = series.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (a, b) in g.iter().zip(&series) {
            assert!((a - b).abs() <= 1e-6 * scale);
        }
    }

    #[test]
    fn perturbed_identity_fundamental_solution() {
        let op = EllipticOperator::perturbed_identity(0.1, OperatorForm::Divergence);
        let p = Parametrix::new(&op).unwrap();
        let disk = Domain::disk([0.3, 0.4], 0.2).unwrap();
        let quad = disk_nystrom_quadrature(&[0.3, 0.4], 0.2, 0.01).unwrap();
        let f = solve_fundamental(&p, &disk, &quad, &[vec![0.3, 0.4]]).unwrap();
        let check = f.verify(&Bump::new(&[0.3, 0.4], 0.15), Target::Point(0)).unwrap();
        assert!(check.relative <= 2e-2, "{check:?}");
        let growth = f.growth(Target::Point(0)).unwrap();
        assert!(growth.within(0.3), "{growth:?}");
        let csv = f.to_csv(Target::Point(0)).unwrap();
        assert!(csv.starts_with("x1,x2,y1,y2,H,F,F_minus_H\n"));
    }
}
