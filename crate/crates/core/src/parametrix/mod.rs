//! Levi parametrix and fundamental solutions of non-divergence operators.
//!
//! The operator is L = Σaⁱʲ∂ᵢⱼ + b·∇ + c; divergence-form input is expanded
//! with [`EllipticOperator::to_nondivergence`]. The parametrix is
//! H(x, y) = F_n(ρ(x, y))/d(y) with ρ² = A⁻¹(y)(x − y)·(x − y),
//! d = √det A(y), F₂(t) = −ln t/(2π) and F_n(t) = t^{2−n}/((n − 2)ωₙ), so that
//! ∫[−H L*φ + (L_xH) φ] = φ(y) for test functions φ.

mod fundamental;
mod nystrom;

pub use fundamental::{solve_fundamental, FundamentalCheck, FundamentalSolution, GrowthReport, Target};
pub use nystrom::{
    composition_law, factor_fredholm, iterated_kernel, nystrom_assemble, nystrom_assemble_with_cutoff, CompositionLaw,
    DefectDiagnostics, ExponentFit, FredholmSystem, KernelGrid, KernelKind,
};

use serde::Serialize;
use std::f64::consts::PI;
use thiserror::Error;

use crate::geometry::{sphere_quadrature, Domain, GeometryError};
use crate::operators::{apply_adjoint, Bump, EllipticOperator, OperatorError, ScalarField};
use crate::small::{determinant, frobenius, inverse, mat_vec, pad, sub, symmetric_eigenvalues, unit_sphere_area, Mat3, Vec3, ZERO33};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParametrixError {
    #[error("x and y coincide")]
    CoincidentPoints,
    #[error("coefficient matrix is singular at the pole")]
    SingularCoefficientMatrix,
    #[error("unsupported dimension {0} (expected 2 or 3)")]
    UnsupportedDimension(usize),
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("singular cutoff {cutoff:e} is below the node spacing {spacing:e}")]
    UnresolvedSingularity { cutoff: f64, spacing: f64 },
    #[error(
        "I − A is numerically singular (smallest singular value {sigma_min:e}, norm {norm:e}); \
         the null-space correction of the integral equation is not implemented"
    )]
    NontrivialDefect { sigma_min: f64, norm: f64 },
    #[error("test function support leaves the domain")]
    TestFunctionNotSupported,
    #[error("insufficient samples: {found} usable, {required} required")]
    InsufficientSamples { found: usize, required: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// Coefficient data frozen at the pole y.
#[derive(Debug, Clone, Copy)]
struct Frame {
    a: Mat3,
    a_inv: Mat3,
    d: f64,
}

/// Canonical parametrix of a non-divergence operator.
#[derive(Debug, Clone)]
pub struct Parametrix {
    op: EllipticOperator,
    dim: usize,
    omega: f64,
}

/// Bounds of H against |x − y| from the ellipticity constant μ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SandwichReport {
    pub mu: f64,
    pub lower: f64,
    pub value: f64,
    pub upper: f64,
    /// False in 2D when μ|x − y| ≥ 1, where the logarithmic bounds do not apply.
    pub applicable: bool,
    pub holds: bool,
}

impl Parametrix {
    pub fn new(op: &EllipticOperator) -> Result<Self, ParametrixError> {
        let dim = op.dim();
        if !(2..=3).contains(&dim) {
            return Err(ParametrixError::UnsupportedDimension(dim));
        }
        Ok(Parametrix {
            op: op.to_nondivergence()?,
            dim,
            omega: unit_sphere_area(dim),
        })
    }

    /// The non-divergence operator L.
    pub fn operator(&self) -> &EllipticOperator {
        &self.op
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// True when L_xH vanishes identically: constant A and no lower-order terms.
    pub fn kernel_vanishes(&self) -> bool {
        self.op.has_constant_principal() && !self.op.has_lower_order()
    }

    fn frame(&self, y: &[f64]) -> Result<Frame, ParametrixError> {
        let a = self.op.principal(y);
        let det = determinant(&a, self.dim);
        let a_inv = inverse(&a, self.dim).ok_or(ParametrixError::SingularCoefficientMatrix)?;
        if !(det > 0.0) {
            return Err(ParametrixError::SingularCoefficientMatrix);
        }
        Ok(Frame { a, a_inv, d: det.sqrt() })
    }

    /// Offset x − y, A⁻¹(y)(x − y) and ρ.
    fn offset(&self, f: &Frame, x: &[f64], y: &[f64]) -> Result<(Vec3, Vec3, f64), ParametrixError> {
        let r = sub(x, y);
        if r.iter().all(|v| *v == 0.0) {
            return Err(ParametrixError::CoincidentPoints);
        }
        let q = mat_vec(&f.a_inv, &r, self.dim);
        let rho = (0..self.dim).map(|i| q[i] * r[i]).sum::<f64>().sqrt();
        Ok((r, q, rho))
    }

    /// ρ(x, y) = (A⁻¹(y)(x − y)·(x − y))^{1/2}.
    pub fn rho(&self, x: &[f64], y: &[f64]) -> Result<f64, ParametrixError> {
        let f = self.frame(y)?;
        Ok(self.offset(&f, x, y)?.2)
    }

    fn profile(&self, rho: f64) -> f64 {
        match self.dim {
            2 => -rho.ln() / (2.0 * PI),
            n => rho.powi(2 - n as i32) / ((n as f64 - 2.0) * self.omega),
        }
    }

    pub fn value(&self, x: &[f64], y: &[f64]) -> Result<f64, ParametrixError> {
        let f = self.frame(y)?;
        let (_, _, rho) = self.offset(&f, x, y)?;
        Ok(self.profile(rho) / f.d)
    }

    /// ∇ₓH = −A⁻¹(y)(x − y)/(ωₙ d ρⁿ).
    pub fn gradient(&self, x: &[f64], y: &[f64]) -> Result<Vec3, ParametrixError> {
        let f = self.frame(y)?;
        let (_, q, rho) = self.offset(&f, x, y)?;
        let s = -1.0 / (self.omega * f.d * rho.powi(self.dim as i32));
        Ok([q[0] * s, q[1] * s, q[2] * s])
    }

    /// ∂²ₓH = −(A⁻¹)ᵢⱼ/(ωₙ d ρⁿ) + n (A⁻¹r)ᵢ(A⁻¹r)ⱼ/(ωₙ d ρ^{n+2}).
    pub fn hessian(&self, x: &[f64], y: &[f64]) -> Result<Mat3, ParametrixError> {
        let f = self.frame(y)?;
        let (_, q, rho) = self.offset(&f, x, y)?;
        Ok(self.hessian_in(&f, &q, rho))
    }

    fn hessian_in(&self, f: &Frame, q: &Vec3, rho: f64) -> Mat3 {
        let n = self.dim;
        let base = self.omega * f.d * rho.powi(n as i32);
        let mut h = ZERO33;
        for i in 0..n {
            for j in 0..n {
                h[i][j] = -f.a_inv[i][j] / base + n as f64 * q[i] * q[j] / (base * rho * rho);
            }
        }
        h
    }

    /// Σaⁱʲ(y)∂ᵢⱼH(x, y) relative to the Frobenius norm of the Hessian.
    pub fn frozen_defect(&self, x: &[f64], y: &[f64]) -> Result<f64, ParametrixError> {
        let f = self.frame(y)?;
        let (_, q, rho) = self.offset(&f, x, y)?;
        let h = self.hessian_in(&f, &q, rho);
        let s = crate::small::trace_product(&f.a, &h, self.dim);
        Ok(s.abs() / frobenius(&h, self.dim))
    }

    /// K(x, y) = L_xH(x, y).
    ///
    /// The principal part is evaluated as Σ(aⁱʲ(x) − aⁱʲ(y))∂ᵢⱼH, which is
    /// algebraically equal because Σaⁱʲ(y)∂ᵢⱼH = 0, and exactly zero for
    /// constant coefficients.
    pub fn kernel(&self, x: &[f64], y: &[f64]) -> Result<f64, ParametrixError> {
        let f = self.frame(y)?;
        let (_, q, rho) = self.offset(&f, x, y)?;
        if self.kernel_vanishes() {
            return Ok(0.0);
        }
        let n = self.dim;
        let mut k = 0.0;
        if !self.op.has_constant_principal() {
            let ax = self.op.principal(x);
            let h = self.hessian_in(&f, &q, rho);
            for i in 0..n {
                for j in 0..n {
                    k += (ax[i][j] - f.a[i][j]) * h[i][j];
                }
            }
        }
        if self.op.has_drift() {
            let b = self.op.drift(x);
            let s = -1.0 / (self.omega * f.d * rho.powi(n as i32));
            k += (0..n).map(|i| b[i] * q[i] * s).sum::<f64>();
        }
        let c = self.op.potential(x);
        if c != 0.0 {
            k += c * self.profile(rho) / f.d;
        }
        Ok(k)
    }

    /// Ellipticity constant μ ≥ 1 at y: declared, else from the eigenvalues of A(y).
    fn mu(&self, f: &Frame) -> f64 {
        self.op.declared_ellipticity().unwrap_or_else(|| {
            let ev = symmetric_eigenvalues(&f.a, self.dim);
            ev[self.dim - 1].max(1.0 / ev[0]).max(1.0)
        })
    }

    /// Two-sided bound of H by the Newtonian profile of |x − y|.
    pub fn sandwich(&self, x: &[f64], y: &[f64]) -> Result<SandwichReport, ParametrixError> {
        let f = self.frame(y)?;
        let (r, _, rho) = self.offset(&f, x, y)?;
        let dist = (0..self.dim).map(|i| r[i] * r[i]).sum::<f64>().sqrt();
        let value = self.profile(rho) / f.d;
        let mu = self.mu(&f);
        let n = self.dim as f64;
        let (lower, upper, applicable) = if self.dim == 2 {
            (
                -(mu * dist).ln() / (2.0 * PI * mu),
                -mu * (dist / mu).ln() / (2.0 * PI),
                mu * dist < 1.0,
            )
        } else {
            let base = dist.powf(2.0 - n) / ((n - 2.0) * self.omega);
            (base * mu.powf(-n / 2.0), base * mu.powf(n / 2.0), true)
        };
        let slack = 1e-12 * value.abs().max(1.0);
        Ok(SandwichReport {
            mu,
            lower,
            value,
            upper,
            applicable,
            holds: !applicable || (lower <= value + slack && value <= upper + slack),
        })
    }
}

/// Radial and angular orders of a polar product rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct PolarRule {
    pub radial: usize,
    pub angular: usize,
}

/// Rule for near-field corrections.
pub(crate) const NEAR_RULE: PolarRule = PolarRule { radial: 16, angular: 48 };
/// Rule for test-function integrals.
const TEST_RULE: PolarRule = PolarRule { radial: 64, angular: 96 };

/// ∫ f over B(center, radius) ∩ Ω in polar coordinates about `center`.
///
/// The radius along each ray is r = T s² with T the distance to the ball
/// edge or ∂Ω, which makes r^{1−n}-type singularities at the center smooth
/// in s.
pub(crate) fn polar_integral(
    domain: Option<&Domain>,
    center: &[f64],
    radius: f64,
    rule: PolarRule,
    f: &dyn Fn(&[f64]) -> f64,
) -> Result<f64, ParametrixError> {
    let n = center.len();
    let order = if n == 2 { rule.angular } else { rule.angular / 2 };
    let dirs = sphere_quadrature(&vec![0.0; n], 1.0, order.max(1))?;
    let (s, sw) = crate::geometry::gauss_legendre(rule.radial, 0.0, 1.0)?;
    let mut total = 0.0;
    let mut p = vec![0.0; n];
    for k in 0..dirs.len() {
        let e = dirs.node(k);
        let t = match domain {
            Some(d) => radius.min(d.ray_exit(center, e)),
            None => radius,
        };
        if !(t > 0.0) {
            continue;
        }
        let mut ray = 0.0;
        for (si, wi) in s.iter().zip(&sw) {
            let r = t * si * si;
            for d in 0..n {
                p[d] = center[d] + r * e[d];
            }
            ray += wi * f(&p) * r.powi(n as i32 - 1) * 2.0 * t * si;
        }
        total += dirs.weight(k) * ray;
    }
    Ok(total)
}

fn check_support(domain: &Domain, phi: &Bump) -> Result<(), ParametrixError> {
    if domain.signed_distance(&phi.center) < phi.radius {
        return Err(ParametrixError::TestFunctionNotSupported);
    }
    Ok(())
}

/// Radius about y of a ball containing the support of φ.
fn covering_radius(phi: &Bump, y: &[f64]) -> f64 {
    crate::small::dist(&phi.center, y) + phi.radius
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ParametrixCheck {
    pub target: [f64; 3],
    /// ∫[−H L*φ + (L_xH) φ].
    pub integral: f64,
    pub phi_at_target: f64,
    pub residual: f64,
}

/// Residual of the parametrix identity ∫[−H L*φ + (L_xH) φ] = φ(y).
///
/// The integral is taken in polar coordinates about y, which absorbs the
/// singularities of H and L_xH.
pub fn verify_parametrix(
    p: &Parametrix,
    domain: &Domain,
    phi: &Bump,
    y: &[f64],
) -> Result<ParametrixCheck, ParametrixError> {
    check_support(domain, phi)?;
    let failure = std::cell::RefCell::new(None);
    let integrand = |x: &[f64]| -> f64 {
        let v = phi.value(x);
        if v == 0.0 && crate::small::dist(x, &phi.center) >= phi.radius {
            return 0.0;
        }
        let term = (|| -> Result<f64, ParametrixError> {
            let adj = apply_adjoint(&p.op, phi, x)?;
            Ok(-p.value(x, y)? * adj + p.kernel(x, y)? * v)
        })();
        term.unwrap_or_else(|e| {
            failure.borrow_mut().get_or_insert(e);
            0.0
        })
    };
    let integral = polar_integral(None, y, covering_radius(phi, y), TEST_RULE, &integrand)?;
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    let phi_y = phi.value(y);
    Ok(ParametrixCheck {
        target: pad(y),
        integral,
        phi_at_target: phi_y,
        residual: (integral - phi_y).abs(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::OperatorForm;
    use crate::small::diagonal;

    fn laplace(n: usize) -> Parametrix {
        Parametrix::new(&EllipticOperator::laplace(n, OperatorForm::Nondivergence)).unwrap()
    }

    #[test]
    fn rho_examples() {
        let p = laplace(2);
        assert!((p.rho(&[0.3, 0.4], &[0.0, 0.0]).unwrap() - 0.5).abs() < 1e-15);
        let q = Parametrix::new(&EllipticOperator::constant(2, diagonal(&[4.0, 1.0]), OperatorForm::Nondivergence))
            .unwrap();
        assert!((q.rho(&[1.0, 0.0], &[0.0, 0.0]).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(p.rho(&[1.0, 1.0], &[1.0, 1.0]), Err(ParametrixError::CoincidentPoints));
    }

    #[test]
    fn newtonian_profiles() {
        let (x, y) = ([0.5, 0.1, -0.2], [0.1, 0.3, 0.2]);
        let r = crate::small::dist(&x, &y);
        let p3 = laplace(3);
        assert!((p3.value(&x, &y).unwrap() - 1.0 / (4.0 * PI * r)).abs() < 1e-14);
        let g = p3.gradient(&x, &y).unwrap();
        for i in 0..3 {
            assert!((g[i] + (x[i] - y[i]) / (4.0 * PI * r.powi(3))).abs() < 1e-13);
        }
        let p2 = laplace(2);
        let r2 = crate::small::dist(&x[..2], &y[..2]);
        assert!((p2.value(&x[..2], &y[..2]).unwrap() + r2.ln() / (2.0 * PI)).abs() < 1e-15);
    }

    #[test]
    fn kernel_cases() {
        let p = laplace(2);
        assert_eq!(p.kernel(&[0.2, 0.1], &[0.0, 0.0]).unwrap(), 0.0);
        let op = EllipticOperator::laplace(2, OperatorForm::Nondivergence).with_potential(|_| 3.0);
        let q = Parametrix::new(&op).unwrap();
        let (x, y) = ([0.2, 0.1], [0.05, -0.3]);
        assert!((q.kernel(&x, &y).unwrap() - 3.0 * q.value(&x, &y).unwrap()).abs() < 1e-14);
    }

    #[test]
    fn hessian_matches_differenced_gradient() {
        let op = EllipticOperator::constant(2, [[2.0, 0.3, 0.0], [0.3, 1.0, 0.0], [0.0; 3]], OperatorForm::Nondivergence);
        let p = Parametrix::new(&op).unwrap();
        let (x, y) = ([0.4, -0.2], [0.1, 0.1]);
        let h = p.hessian(&x, &y).unwrap();
        let e = 1e-6;
        for j in 0..2 {
            let (mut xp, mut xm) = (x, x);
            xp[j] += e;
            xm[j] -= e;
            let (gp, gm) = (p.gradient(&xp, &y).unwrap(), p.gradient(&xm, &y).unwrap());
            for i in 0..2 {
                assert!(((gp[i] - gm[i]) / (2.0 * e) - h[i][j]).abs() < 1e-6 * (1.0 + h[i][j].abs()));
            }
        }
        assert!(p.frozen_defect(&x, &y).unwrap() < 1e-14);
    }

    #[test]
    fn polar_integral_of_inverse_distance() {
        let f = |x: &[f64]| 1.0 / crate::small::norm(x);
        let v = polar_integral(None, &[0.0, 0.0], 1.0, NEAR_RULE, &f).unwrap();
        assert!((v - 2.0 * PI).abs() < 1e-12);
        let disk = Domain::disk([0.0, 0.0], 1.0).unwrap();
        let area = polar_integral(Some(&disk), &[0.5, 0.0], 2.0, TEST_RULE, &|_| 1.0).unwrap();
        assert!((area - PI).abs() < 1e-3);
    }

    #[test]
    fn laplace_parametrix_identity() {
        let disk = Domain::disk([0.0, 0.0], 1.0).unwrap();
        let phi = Bump::new(&[0.1, 0.0], 0.5);
        let rep = verify_parametrix(&laplace(2), &disk, &phi, &[0.1, 0.0]).unwrap();
        assert!(rep.residual <= 1e-3, "{rep:?}");
        let zero = Bump::new(&[0.1, 0.0], 0.5).scaled(0.0);
        assert_eq!(verify_parametrix(&laplace(2), &disk, &zero, &[0.1, 0.0]).unwrap().residual, 0.0);
        assert_eq!(
            verify_parametrix(&laplace(2), &disk, &Bump::new(&[0.8, 0.0], 0.5), &[0.8, 0.0]),
            Err(ParametrixError::TestFunctionNotSupported)
        );
    }
}
