use std::sync::Arc;

use super::OperatorError;
use crate::small::{Mat3, Vec3, ZERO3, ZERO33};

/// Pointwise-evaluable real function with optional analytic derivatives.
pub trait ScalarField: Send + Sync {
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64]) -> f64;
    fn gradient(&self, _x: &[f64]) -> Option<Vec3> {
        None
    }
    fn hessian(&self, _x: &[f64]) -> Option<Mat3> {
        None
    }
}

impl<T: ScalarField + ?Sized> ScalarField for Arc<T> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn value(&self, x: &[f64]) -> f64 {
        (**self).value(x)
    }
    fn gradient(&self, x: &[f64]) -> Option<Vec3> {
        (**self).gradient(x)
    }
    fn hessian(&self, x: &[f64]) -> Option<Mat3> {
        (**self).hessian(x)
    }
}

type ValueFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
type GradFn = Arc<dyn Fn(&[f64]) -> Vec3 + Send + Sync>;
type HessFn = Arc<dyn Fn(&[f64]) -> Mat3 + Send + Sync>;

/// Closure-backed field.
#[derive(Clone)]
pub struct FnField {
    dim: usize,
    value: ValueFn,
    gradient: Option<GradFn>,
    hessian: Option<HessFn>,
}

impl FnField {
    pub fn new(dim: usize, value: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        FnField {
            dim,
            value: Arc::new(value),
            gradient: None,
            hessian: None,
        }
    }

    pub fn with_gradient(mut self, g: impl Fn(&[f64]) -> Vec3 + Send + Sync + 'static) -> Self {
        self.gradient = Some(Arc::new(g));
        self
    }

    pub fn with_hessian(mut self, h: impl Fn(&[f64]) -> Mat3 + Send + Sync + 'static) -> Self {
        self.hessian = Some(Arc::new(h));
        self
    }

    pub fn constant(dim: usize, c: f64) -> Self {
        FnField::new(dim, move |_| c)
            .with_gradient(|_| ZERO3)
            .with_hessian(|_| ZERO33)
    }
}

impl ScalarField for FnField {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, x: &[f64]) -> f64 {
        (self.value)(x)
    }
    fn gradient(&self, x: &[f64]) -> Option<Vec3> {
        self.gradient.as_ref().map(|g| g(x))
    }
    fn hessian(&self, x: &[f64]) -> Option<Mat3> {
        self.hessian.as_ref().map(|h| h(x))
    }
}

/// Finite-difference policy for derivatives that are not supplied analytically.
///
/// Central differences with one Richardson extrapolation step. The default
/// step is ε^{1/3}(1+|x|) for first derivatives and ε^{1/4}(1+|x|) for second
/// derivatives, where ε is the machine epsilon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FiniteDifference {
    pub enabled: bool,
    pub step: Option<f64>,
}

impl Default for FiniteDifference {
    fn default() -> Self {
        FiniteDifference {
            enabled: true,
            step: None,
        }
    }
}

impl FiniteDifference {
    pub fn disabled() -> Self {
        FiniteDifference {
            enabled: false,
            step: None,
        }
    }

    pub fn with_step(step: f64) -> Self {
        FiniteDifference {
            enabled: true,
            step: Some(step),
        }
    }

    fn step_for(&self, x: &[f64], order: i32) -> f64 {
        let scale = 1.0 + crate::small::norm(x);
        self.step
            .unwrap_or_else(|| f64::EPSILON.powf(1.0 / (2.0 + order as f64)) * scale)
    }

    /// Gradient of an arbitrary closure.
    pub fn gradient_of(&self, f: &dyn Fn(&[f64]) -> f64, x: &[f64]) -> Vec3 {
        let h = self.step_for(x, 1);
        let n = x.len();
        let mut g = ZERO3;
        let mut y = x.to_vec();
        let mut central = |k: usize, s: f64| {
            y[k] = x[k] + s;
            let fp = f(&y);
            y[k] = x[k] - s;
            let fm = f(&y);
            y[k] = x[k];
            (fp - fm) / (2.0 * s)
        };
        for (k, gk) in g.iter_mut().enumerate().take(n) {
            let coarse = central(k, h);
            let fine = central(k, 0.5 * h);
            *gk = (4.0 * fine - coarse) / 3.0;
        }
        g
    }

    /// Hessian of an arbitrary closure.
    pub fn hessian_of(&self, f: &dyn Fn(&[f64]) -> f64, x: &[f64]) -> Mat3 {
        let h = self.step_for(x, 2);
        let n = x.len();
        let mut out = ZERO33;
        let mut y = x.to_vec();
        let f0 = f(x);
        let mut second = |i: usize, j: usize, s: f64| -> f64 {
            if i == j {
                y[i] = x[i] + s;
                let fp = f(&y);
                y[i] = x[i] - s;
                let fm = f(&y);
                y[i] = x[i];
                (fp - 2.0 * f0 + fm) / (s * s)
            } else {
                let mut eval = |a: f64, b: f64| {
                    y[i] = x[i] + a;
                    y[j] = x[j] + b;
                    let v = f(&y);
                    y[i] = x[i];
                    y[j] = x[j];
                    v
                };
                (eval(s, s) - eval(s, -s) - eval(-s, s) + eval(-s, -s)) / (4.0 * s * s)
            }
        };
        for i in 0..n {
            for j in i..n {
                let coarse = second(i, j, h);
                let fine = second(i, j, 0.5 * h);
                let v = (4.0 * fine - coarse) / 3.0;
                out[i][j] = v;
                out[j][i] = v;
            }
        }
        out
    }
}

/// Gradient from the analytic formula when present, else finite differences.
pub fn gradient(u: &dyn ScalarField, x: &[f64], fd: &FiniteDifference) -> Result<Vec3, OperatorError> {
    if let Some(g) = u.gradient(x) {
        return Ok(g);
    }
    if !fd.enabled {
        return Err(OperatorError::MissingDerivatives);
    }
    Ok(fd.gradient_of(&|y| u.value(y), x))
}

/// Hessian from the analytic formula when present, else finite differences.
pub fn hessian(u: &dyn ScalarField, x: &[f64], fd: &FiniteDifference) -> Result<Mat3, OperatorError> {
    if let Some(h) = u.hessian(x) {
        return Ok(h);
    }
    if !fd.enabled {
        return Err(OperatorError::MissingDerivatives);
    }
    Ok(fd.hessian_of(&|y| u.value(y), x))
}

/// Laplacian from the Hessian (analytic or finite differences).
pub fn laplacian(u: &dyn ScalarField, x: &[f64], fd: &FiniteDifference) -> Result<f64, OperatorError> {
    let h = hessian(u, x, fd)?;
    Ok((0..u.dim()).map(|i| h[i][i]).sum())
}

/// Smooth bump exp(−1/(1 − |x − c|²/s²)) supported in the closed ball B̄(c, s).
#[derive(Debug, Clone, PartialEq)]
pub struct Bump {
    pub center: Vec<f64>,
    pub radius: f64,
    pub amplitude: f64,
}

impl Bump {
    pub fn new(center: &[f64], radius: f64) -> Self {
        Bump {
            center: center.to_vec(),
            radius,
            amplitude: 1.0,
        }
    }

    pub fn scaled(mut self, amplitude: f64) -> Self {
        self.amplitude = amplitude;
        self
    }

    fn parts(&self, x: &[f64]) -> Option<(f64, Vec3, f64, f64)> {
        let s2 = self.radius * self.radius;
        let d = crate::small::sub(x, &self.center);
        let q = crate::small::dot(&d, &d) / s2;
        if q >= 1.0 {
            return None;
        }
        let one = 1.0 - q;
        let phi = self.amplitude * (-1.0 / one).exp();
        let g1 = -1.0 / (one * one);
        let g2 = -2.0 / (one * one * one);
        Some((phi, d, g1, g2))
    }
}

impl ScalarField for Bump {
    fn dim(&self) -> usize {
        self.center.len()
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.parts(x).map_or(0.0, |p| p.0)
    }

    fn gradient(&self, x: &[f64]) -> Option<Vec3> {
        let s2 = self.radius * self.radius;
        Some(match self.parts(x) {
            None => ZERO3,
            Some((phi, d, g1, _)) => {
                let mut g = ZERO3;
                for k in 0..self.dim() {
                    g[k] = phi * g1 * 2.0 * d[k] / s2;
                }
                g
            }
        })
    }

    fn hessian(&self, x: &[f64]) -> Option<Mat3> {
        let s2 = self.radius * self.radius;
        Some(match self.parts(x) {
            None => ZERO33,
            Some((phi, d, g1, g2)) => {
                let mut h = ZERO33;
                let n = self.dim();
                for i in 0..n {
                    for j in 0..n {
                        let qi = 2.0 * d[i] / s2;
                        let qj = 2.0 * d[j] / s2;
                        let qij = if i == j { 2.0 / s2 } else { 0.0 };
                        h[i][j] = phi * ((g2 + g1 * g1) * qi * qj + g1 * qij);
                    }
                }
                h
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn richardson_matches_analytic_bump() {
        let b = Bump::new(&[0.1, -0.2], 0.7);
        let fd = FiniteDifference::with_step(1e-4);
        let value = |y: &[f64]| b.value(y);
        for x in [[0.3, 0.1], [-0.2, -0.4], [0.5, -0.2]] {
            let g = b.gradient(&x).unwrap();
            let gf = fd.gradient_of(&value, &x);
            let h = b.hessian(&x).unwrap();
            let hf = fd.hessian_of(&value, &x);
            for i in 0..2 {
                assert!((g[i] - gf[i]).abs() < 1e-6);
                for j in 0..2 {
                    assert!((h[i][j] - hf[i][j]).abs() < 1e-6);
                }
            }
        }
    }

    #[test]
    fn missing_derivatives_when_disabled() {
        let f = FnField::new(2, |x| x[0] * x[1]);
        assert_eq!(gradient(&f, &[0.0, 0.0], &FiniteDifference::disabled()), Err(OperatorError::MissingDerivatives));
        let h = hessian(&f, &[0.3, 0.2], &FiniteDifference::default()).unwrap();
        assert!((h[0][1] - 1.0).abs() < 1e-6);
    }
}
