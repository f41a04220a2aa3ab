//! Elliptic operators in divergence and non-divergence form.
//!
//! Coefficient slots are shared between the two forms and interpreted by
//! [`OperatorForm`]:
//!
//! | slot        | non-divergence `Σa∂²u + b·∇u + cu` | divergence `−∂ᵢ(aⁱʲ∂ⱼu + cⁱu) + dⁱ∂ᵢu + du` |
//! |-------------|-------------------------------------|-----------------------------------------------|
//! | `principal` | aⁱʲ                                 | aⁱʲ                                           |
//! | `drift`     | bⁱ                                  | dⁱ                                            |
//! | `flux`      | unused                              | cⁱ                                            |
//! | `potential` | c                                   | d                                             |
//!
//! Forms are never converted implicitly; [`EllipticOperator::to_nondivergence`]
//! is the explicit expansion.

mod field;

pub use field::{gradient, hessian, laplacian, Bump, FiniteDifference, FnField, ScalarField};

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::Arc;
use thiserror::Error;

use crate::small::{identity, symmetric_eigenvalues, Mat3, Vec3, ZERO3, ZERO33};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OperatorError {
    #[error("coefficient matrix is not symmetric (defect {defect:e})")]
    NotSymmetric { defect: f64 },
    #[error("coefficient matrix is not positive definite (eigenvalue {eigenvalue:e})")]
    NotPositiveDefinite { eigenvalue: f64 },
    #[error("derivatives unavailable: no analytic formula and finite differences disabled")]
    MissingDerivatives,
    #[error("sample set is empty")]
    EmptySampleSet,
    #[error("operator is in {actual:?} form, expected {expected:?}")]
    FormMismatch { expected: OperatorForm, actual: OperatorForm },
    #[error("dimension mismatch: operator {operator}, field {field}")]
    DimensionMismatch { operator: usize, field: usize },
    #[error("unknown coefficient preset '{0}' (known: laplace, diag(a,b), perturbed_identity(eps))")]
    UnknownPreset(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorForm {
    Divergence,
    Nondivergence,
}

/// Caller-declared Hölder data (exponent α and seminorm bound Λ).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HolderData {
    pub exponent: f64,
    pub constant: f64,
}

type MatrixFn = Arc<dyn Fn(&[f64]) -> Mat3 + Send + Sync>;
type MatrixDerivFn = Arc<dyn Fn(&[f64]) -> [Mat3; 3] + Send + Sync>;
type VectorFn = Arc<dyn Fn(&[f64]) -> Vec3 + Send + Sync>;
type ScalarFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Second-order operator with symmetric principal part.
#[derive(Clone)]
pub struct EllipticOperator {
    dim: usize,
    form: OperatorForm,
    label: String,
    principal: MatrixFn,
    principal_derivative: Option<MatrixDerivFn>,
    constant_principal: bool,
    drift: Option<VectorFn>,
    flux: Option<VectorFn>,
    potential: Option<ScalarFn>,
    ellipticity: Option<f64>,
    holder: Option<HolderData>,
    fd: FiniteDifference,
}

impl std::fmt::Debug for EllipticOperator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("EllipticOperator")
            .field("label", &self.label)
            .field("dim", &self.dim)
            .field("form", &self.form)
            .finish_non_exhaustive()
    }
}

impl EllipticOperator {
    /// Operator with a constant principal matrix and no lower-order terms.
    pub fn constant(dim: usize, a: Mat3, form: OperatorForm) -> Self {
        EllipticOperator {
            dim,
            form,
            label: "constant".into(),
            principal: Arc::new(move |_| a),
            principal_derivative: Some(Arc::new(|_| [ZERO33; 3])),
            constant_principal: true,
            drift: None,
            flux: None,
            potential: None,
            ellipticity: None,
            holder: None,
            fd: FiniteDifference::default(),
        }
    }

    /// Δ in non-divergence form, or −Δ in divergence form.
    pub fn laplace(dim: usize, form: OperatorForm) -> Self {
        Self::constant(dim, identity(dim), form).labelled("laplace")
    }

    pub fn diagonal(entries: &[f64], form: OperatorForm) -> Self {
        Self::constant(entries.len(), crate::small::diagonal(entries), form).labelled(&format!(
            "diag({})",
            entries.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
        ))
    }

    /// Variable principal part A(x) without analytic derivatives.
    pub fn variable(dim: usize, form: OperatorForm, a: impl Fn(&[f64]) -> Mat3 + Send + Sync + 'static) -> Self {
        EllipticOperator {
            dim,
            form,
            label: "variable".into(),
            principal: Arc::new(a),
            principal_derivative: None,
            constant_principal: false,
            drift: None,
            flux: None,
            potential: None,
            ellipticity: None,
            holder: None,
            fd: FiniteDifference::default(),
        }
    }

    /// A(x) = (1 + ε sin(πx₁) sin(πx₂)) I in the plane, with analytic ∂A.
    pub fn perturbed_identity(eps: f64, form: OperatorForm) -> Self {
        let scalar = move |x: &[f64]| 1.0 + eps * (PI * x[0]).sin() * (PI * x[1]).sin();
        let mut op = Self::variable(2, form, move |x| crate::small::scale_mat(&identity(2), scalar(x)))
            .with_principal_derivative(move |x| {
                let gx = eps * PI * (PI * x[0]).cos() * (PI * x[1]).sin();
                let gy = eps * PI * (PI * x[0]).sin() * (PI * x[1]).cos();
                [
                    crate::small::scale_mat(&identity(2), gx),
                    crate::small::scale_mat(&identity(2), gy),
                    ZERO33,
                ]
            })
            .labelled(&format!("perturbed_identity({eps})"));
        op.ellipticity = Some((1.0 + eps.abs()).max(1.0 / (1.0 - eps.abs()).max(f64::MIN_POSITIVE)));
        op.holder = Some(HolderData {
            exponent: 1.0,
            constant: eps.abs() * PI * 2f64.sqrt(),
        });
        op
    }

    /// Parses a preset name: `laplace`, `diag(a,b)` or `perturbed_identity(ε)`.
    pub fn preset(spec: &str, dim: usize, form: OperatorForm) -> Result<Self, OperatorError> {
        let s: String = spec.chars().filter(|c| !c.is_whitespace()).collect();
        let args = |prefix: &str| -> Option<Vec<f64>> {
            let inner = s.strip_prefix(prefix)?.strip_prefix('(')?.strip_suffix(')')?;
            inner.split(',').map(|t| t.parse().ok()).collect()
        };
        if s == "laplace" {
            return Ok(Self::laplace(dim, form));
        }
        if let Some(v) = args("diag") {
            if v.len() == dim && v.iter().all(|x| *x > 0.0) {
                return Ok(Self::diagonal(&v, form));
            }
        }
        if let Some(v) = args("perturbed_identity") {
            if v.len() == 1 && dim == 2 && v[0].abs() < 1.0 {
                return Ok(Self::perturbed_identity(v[0], form));
            }
        }
        Err(OperatorError::UnknownPreset(spec.to_string()))
    }

    pub fn with_principal_derivative(
        mut self,
        d: impl Fn(&[f64]) -> [Mat3; 3] + Send + Sync + 'static,
    ) -> Self {
        self.principal_derivative = Some(Arc::new(d));
        self
    }

    /// Sets bⁱ (non-divergence) or dⁱ (divergence).
    pub fn with_drift(mut self, b: impl Fn(&[f64]) -> Vec3 + Send + Sync + 'static) -> Self {
        self.drift = Some(Arc::new(b));
        self
    }

    /// Sets cⁱ of the divergence form.
    pub fn with_flux(mut self, c: impl Fn(&[f64]) -> Vec3 + Send + Sync + 'static) -> Self {
        self.flux = Some(Arc::new(c));
        self
    }

    /// Sets c (non-divergence) or d (divergence).
    pub fn with_potential(mut self, c: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        self.potential = Some(Arc::new(c));
        self
    }

    pub fn with_ellipticity(mut self, mu: f64) -> Self {
        self.ellipticity = Some(mu);
        self
    }

    pub fn with_holder(mut self, holder: HolderData) -> Self {
        self.holder = Some(holder);
        self
    }

    pub fn finite_difference(&self) -> FiniteDifference {
        self.fd
    }

    pub fn with_finite_difference(mut self, fd: FiniteDifference) -> Self {
        self.fd = fd;
        self
    }

    pub fn labelled(mut self, label: &str) -> Self {
        self.label = label.to_string();
        self
    }

    /// Same coefficient slots read under the other form.
    pub fn reinterpreted(&self, form: OperatorForm) -> Self {
        let mut op = self.clone();
        op.form = form;
        op
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn form(&self) -> OperatorForm {
        self.form
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn declared_ellipticity(&self) -> Option<f64> {
        self.ellipticity
    }

    pub fn holder(&self) -> Option<HolderData> {
        self.holder
    }

    pub fn has_constant_principal(&self) -> bool {
        self.constant_principal
    }

    pub fn has_lower_order(&self) -> bool {
        self.drift.is_some() || self.flux.is_some() || self.potential.is_some()
    }

    pub fn principal(&self, x: &[f64]) -> Mat3 {
        (self.principal)(x)
    }

    pub fn drift(&self, x: &[f64]) -> Vec3 {
        self.drift.as_ref().map_or(ZERO3, |b| b(x))
    }

    pub fn flux(&self, x: &[f64]) -> Vec3 {
        self.flux.as_ref().map_or(ZERO3, |c| c(x))
    }

    pub fn potential(&self, x: &[f64]) -> f64 {
        self.potential.as_ref().map_or(0.0, |c| c(x))
    }

    pub fn has_drift(&self) -> bool {
        self.drift.is_some()
    }

    pub fn has_flux(&self) -> bool {
        self.flux.is_some()
    }

    /// ∂ₖaⁱʲ at x, indexed `[k][i][j]`.
    pub fn principal_derivative(&self, x: &[f64]) -> Result<[Mat3; 3], OperatorError> {
        if let Some(d) = &self.principal_derivative {
            return Ok(d(x));
        }
        if !self.fd.enabled {
            return Err(OperatorError::MissingDerivatives);
        }
        let mut out = [ZERO33; 3];
        for i in 0..self.dim {
            for j in i..self.dim {
                let g = self.fd.gradient_of(&|y| (self.principal)(y)[i][j], x);
                for k in 0..self.dim {
                    out[k][i][j] = g[k];
                    out[k][j][i] = g[k];
                }
            }
        }
        Ok(out)
    }

    /// Σᵢⱼ ∂ᵢⱼ aⁱʲ at x.
    fn principal_double_divergence(&self, x: &[f64]) -> Result<f64, OperatorError> {
        if self.constant_principal {
            return Ok(0.0);
        }
        if !self.fd.enabled {
            return Err(OperatorError::MissingDerivatives);
        }
        if self.principal_derivative.is_some() {
            // Σⱼ ∂ⱼ(Σᵢ ∂ᵢaⁱʲ) by differencing the analytic first derivatives.
            let mut total = 0.0;
            for j in 0..self.dim {
                let g = self.fd.gradient_of(
                    &|y| {
                        let d = self.principal_derivative(y).expect("analytic derivative");
                        (0..self.dim).map(|i| d[i][i][j]).sum::<f64>()
                    },
                    x,
                );
                total += g[j];
            }
            return Ok(total);
        }
        let mut total = 0.0;
        for i in 0..self.dim {
            for j in 0..self.dim {
                let h = self.fd.hessian_of(&|y| (self.principal)(y)[i][j], x);
                total += h[i][j];
            }
        }
        Ok(total)
    }

    fn vector_divergence(&self, f: &VectorFn, x: &[f64]) -> Result<f64, OperatorError> {
        if !self.fd.enabled {
            return Err(OperatorError::MissingDerivatives);
        }
        let mut s = 0.0;
        for k in 0..self.dim {
            s += self.fd.gradient_of(&|y| f(y)[k], x)[k];
        }
        Ok(s)
    }

    fn check(&self, u: &dyn ScalarField, form: OperatorForm) -> Result<(), OperatorError> {
        if self.form != form {
            return Err(OperatorError::FormMismatch {
                expected: form,
                actual: self.form,
            });
        }
        if u.dim() != self.dim {
            return Err(OperatorError::DimensionMismatch {
                operator: self.dim,
                field: u.dim(),
            });
        }
        Ok(())
    }

    /// Explicit expansion of a divergence-form operator L into the
    /// non-divergence operator −L = Σaⁱʲ∂ᵢⱼ + b·∇ + c with
    /// bʲ = Σᵢ∂ᵢaⁱʲ + cʲ − dʲ and c = div(cⁱ) − d.
    ///
    /// Non-divergence operators are returned unchanged.
    pub fn to_nondivergence(&self) -> Result<Self, OperatorError> {
        if self.form == OperatorForm::Nondivergence {
            return Ok(self.clone());
        }
        let mut op = self.clone();
        op.form = OperatorForm::Nondivergence;
        op.flux = None;
        let needs_drift = !self.constant_principal || self.flux.is_some() || self.drift.is_some();
        if needs_drift {
            if self.principal_derivative.is_none() && !self.constant_principal && !self.fd.enabled {
                return Err(OperatorError::MissingDerivatives);
            }
            let src = self.clone();
            op.drift = Some(Arc::new(move |x: &[f64]| {
                let mut b = ZERO3;
                if !src.constant_principal {
                    let d = src.principal_derivative(x).expect("derivative availability checked");
                    for (j, bj) in b.iter_mut().enumerate().take(src.dim) {
                        *bj = (0..src.dim).map(|i| d[i][i][j]).sum();
                    }
                }
                let (c, dd) = (src.flux(x), src.drift(x));
                for k in 0..src.dim {
                    b[k] += c[k] - dd[k];
                }
                b
            }));
        }
        if self.flux.is_some() || self.potential.is_some() {
            let src = self.clone();
            op.potential = Some(Arc::new(move |x: &[f64]| {
                let div = match &src.flux {
                    Some(f) => src.vector_divergence(f, x).unwrap_or(0.0),
                    None => 0.0,
                };
                div - src.potential(x)
            }));
        }
        op.label = format!("expanded {}", self.label);
        Ok(op)
    }
}

/// Extreme eigenvalues of A over the sample points.
pub fn ellipticity_bounds(op: &EllipticOperator, samples: &[Vec<f64>]) -> Result<(f64, f64), OperatorError> {
    if samples.is_empty() {
        return Err(OperatorError::EmptySampleSet);
    }
    let n = op.dim();
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for x in samples {
        let a = op.principal(x);
        let mut defect: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                defect = defect.max((a[i][j] - a[j][i]).abs());
            }
        }
        if defect > 0.0 {
            return Err(OperatorError::NotSymmetric { defect });
        }
        let ev = symmetric_eigenvalues(&a, n);
        if !(ev[0] > 0.0) {
            return Err(OperatorError::NotPositiveDefinite { eigenvalue: ev[0] });
        }
        lo = lo.min(ev[0]);
        hi = hi.max(ev[n - 1]);
    }
    Ok((lo, hi))
}

/// Σaⁱʲ∂ᵢⱼu + Σbⁱ∂ᵢu + cu at x.
pub fn apply_nondiv(op: &EllipticOperator, u: &dyn ScalarField, x: &[f64]) -> Result<f64, OperatorError> {
    op.check(u, OperatorForm::Nondivergence)?;
    let n = op.dim;
    let a = op.principal(x);
    let h = hessian(u, x, &op.fd)?;
    let mut s = crate::small::trace_product(&a, &h, n);
    if op.drift.is_some() {
        let g = gradient(u, x, &op.fd)?;
        let b = op.drift(x);
        s += (0..n).map(|i| b[i] * g[i]).sum::<f64>();
    }
    if op.potential.is_some() {
        s += op.potential(x) * u.value(x);
    }
    Ok(s)
}

/// −Σ∂ᵢ(Σaⁱʲ∂ⱼu + cⁱu) + Σdⁱ∂ᵢu + du at x, expanded by the product rule.
pub fn apply_div(op: &EllipticOperator, u: &dyn ScalarField, x: &[f64]) -> Result<f64, OperatorError> {
    op.check(u, OperatorForm::Divergence)?;
    let n = op.dim;
    let a = op.principal(x);
    let h = hessian(u, x, &op.fd)?;
    let needs_gradient = !op.constant_principal || op.flux.is_some() || op.drift.is_some();
    let g = if needs_gradient { gradient(u, x, &op.fd)? } else { ZERO3 };
    let mut s = -crate::small::trace_product(&a, &h, n);
    if !op.constant_principal {
        let d = op.principal_derivative(x)?;
        for j in 0..n {
            let div_col: f64 = (0..n).map(|i| d[i][i][j]).sum();
            s -= div_col * g[j];
        }
    }
    if let Some(f) = &op.flux {
        let c = f(x);
        s -= op.vector_divergence(f, x)? * u.value(x);
        s -= (0..n).map(|i| c[i] * g[i]).sum::<f64>();
    }
    if op.drift.is_some() {
        let d = op.drift(x);
        s += (0..n).map(|i| d[i] * g[i]).sum::<f64>();
    }
    if op.potential.is_some() {
        s += op.potential(x) * u.value(x);
    }
    Ok(s)
}

/// Applies the operator in whichever form it is declared.
pub fn apply(op: &EllipticOperator, u: &dyn ScalarField, x: &[f64]) -> Result<f64, OperatorError> {
    match op.form {
        OperatorForm::Divergence => apply_div(op, u, x),
        OperatorForm::Nondivergence => apply_nondiv(op, u, x),
    }
}

/// Formal adjoint L* applied to v at x.
///
/// Non-divergence: Σ∂ᵢⱼ(aⁱʲv) − Σ∂ᵢ(bⁱv) + cv.
/// Divergence: −div(A∇v) + c·∇v − div(dv) + dv.
pub fn apply_adjoint(op: &EllipticOperator, v: &dyn ScalarField, x: &[f64]) -> Result<f64, OperatorError> {
    if v.dim() != op.dim {
        return Err(OperatorError::DimensionMismatch {
            operator: op.dim,
            field: v.dim(),
        });
    }
    let n = op.dim;
    let a = op.principal(x);
    let h = hessian(v, x, &op.fd)?;
    let g = gradient(v, x, &op.fd)?;
    let val = v.value(x);
    let mut da_col = ZERO3;
    if !op.constant_principal {
        let d = op.principal_derivative(x)?;
        for (j, dj) in da_col.iter_mut().enumerate().take(n) {
            *dj = (0..n).map(|i| d[i][i][j]).sum();
        }
    }
    let dot = |p: &Vec3, q: &Vec3| (0..n).map(|i| p[i] * q[i]).sum::<f64>();
    match op.form {
        OperatorForm::Nondivergence => {
            let mut s = crate::small::trace_product(&a, &h, n) + 2.0 * dot(&da_col, &g);
            if !op.constant_principal && val != 0.0 {
                s += op.principal_double_divergence(x)? * val;
            }
            if let Some(b) = &op.drift {
                s -= dot(&b(x), &g);
                if val != 0.0 {
                    s -= op.vector_divergence(b, x)? * val;
                }
            }
            s += op.potential(x) * val;
            Ok(s)
        }
        OperatorForm::Divergence => {
            let mut s = -crate::small::trace_product(&a, &h, n) - dot(&da_col, &g);
            s += dot(&op.flux(x), &g);
            if let Some(d) = &op.drift {
                s -= dot(&d(x), &g);
                if val != 0.0 {
                    s -= op.vector_divergence(d, x)? * val;
                }
            }
            s += op.potential(x) * val;
            Ok(s)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quad_field(n: usize) -> FnField {
        FnField::new(n, |x| x.iter().map(|v| v * v).sum())
            .with_gradient(|x| {
                let mut g = ZERO3;
                for (k, v) in x.iter().enumerate() {
                    g[k] = 2.0 * v;
                }
                g
            })
            .with_hessian(move |x| crate::small::scale_mat(&identity(x.len()), 2.0))
    }

    #[test]
    fn ellipticity_examples() {
        let pts = vec![vec![0.1, 0.2], vec![0.9, 0.4]];
        assert_eq!(ellipticity_bounds(&EllipticOperator::laplace(2, OperatorForm::Divergence), &pts).unwrap(), (1.0, 1.0));
        let d = EllipticOperator::diagonal(&[2.0, 0.5], OperatorForm::Divergence);
        assert_eq!(ellipticity_bounds(&d, &pts).unwrap(), (0.5, 2.0));
        let skew = EllipticOperator::constant(2, [[1.0, 0.1, 0.0], [0.0, 1.0, 0.0], [0.0; 3]], OperatorForm::Divergence);
        assert!(matches!(ellipticity_bounds(&skew, &pts), Err(OperatorError::NotSymmetric { .. })));
        let neg = EllipticOperator::diagonal(&[1.0, -1.0], OperatorForm::Divergence);
        assert!(matches!(ellipticity_bounds(&neg, &pts), Err(OperatorError::NotPositiveDefinite { .. })));
        assert_eq!(ellipticity_bounds(&d, &[]), Err(OperatorError::EmptySampleSet));
    }

    #[test]
    fn laplacian_of_square_norm() {
        for n in 1..=3 {
            let op = EllipticOperator::laplace(n, OperatorForm::Nondivergence);
            let x = vec![0.3; n];
            assert_eq!(apply_nondiv(&op, &quad_field(n), &x).unwrap(), 2.0 * n as f64);
        }
    }

    #[test]
    fn form_mismatch_is_reported() {
        let op = EllipticOperator::laplace(2, OperatorForm::Divergence);
        assert!(matches!(apply_nondiv(&op, &quad_field(2), &[0.0, 0.0]), Err(OperatorError::FormMismatch { .. })));
    }

    #[test]
    fn presets_parse() {
        assert!(EllipticOperator::preset("laplace", 2, OperatorForm::Divergence).is_ok());
        assert!(EllipticOperator::preset("diag(2, 0.5)", 2, OperatorForm::Divergence).is_ok());
        let p = EllipticOperator::preset("perturbed_identity(0.1)", 2, OperatorForm::Divergence).unwrap();
        assert!((p.principal(&[0.5, 0.5])[0][0] - 1.1).abs() < 1e-15);
        assert!(EllipticOperator::preset("helmholtz", 2, OperatorForm::Divergence).is_err());
    }

    #[test]
    fn expansion_matches_divergence_form() {
        let op = EllipticOperator::perturbed_identity(0.3, OperatorForm::Divergence)
            .with_flux(|x| [x[1], 0.5 * x[0] * x[0], 0.0])
            .with_drift(|x| [1.0, x[0], 0.0])
            .with_potential(|x| 2.0 + x[1]);
        let nd = op.to_nondivergence().unwrap();
        let u = Bump::new(&[0.4, 0.5], 0.6);
        for x in [[0.3, 0.6], [0.5, 0.2], [0.7, 0.7]] {
            let lhs = apply_div(&op, &u, &x).unwrap();
            let rhs = apply_nondiv(&nd, &u, &x).unwrap();
            assert!((lhs + rhs).abs() < 1e-7, "{lhs} vs {rhs}");
        }
    }

    #[test]
    fn adjoint_satisfies_green_identity() {
        // ∫ (L u) v = ∫ u (L* v) for compactly supported u, v.
        let op = EllipticOperator::perturbed_identity(0.4, OperatorForm::Nondivergence)
            .with_drift(|x| [x[1], -x[0], 0.0])
            .with_potential(|x| x[0]);
        let u = Bump::new(&[0.45, 0.5], 0.3);
        let v = Bump::new(&[0.55, 0.5], 0.3);
        let q = crate::geometry::box_quadrature(&[0.1, 0.1], &[0.9, 0.9], 40, 4).unwrap();
        let lhs = q.integrate(|x| apply_nondiv(&op, &u, x).unwrap() * v.value(x));
        let rhs = q.integrate(|x| u.value(x) * apply_adjoint(&op, &v, x).unwrap());
        assert!((lhs - rhs).abs() < 1e-7 * lhs.abs().max(1e-3), "{lhs} vs {rhs}");

        let dop = EllipticOperator::perturbed_identity(0.4, OperatorForm::Divergence)
            .with_flux(|x| [x[1], 0.2, 0.0])
            .with_drift(|x| [x[0], x[1], 0.0])
            .with_potential(|x| 1.0 + x[1]);
        let lhs = q.integrate(|x| apply_div(&dop, &u, x).unwrap() * v.value(x));
        let rhs = q.integrate(|x| u.value(x) * apply_adjoint(&dop, &v, x).unwrap());
        assert!((lhs - rhs).abs() < 1e-7 * lhs.abs().max(1e-3), "{lhs} vs {rhs}");
    }
}
