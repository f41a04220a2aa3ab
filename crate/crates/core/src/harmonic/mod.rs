//! Harmonic functions: exact samples, radial energy diagnostics and Perron
//! iteration.
//!
//! Radial quantities about a center ξ:
//!
//! | name | definition |
//! |------|------------|
//! | `H(r)` | ∫_{S(r)} u² |
//! | `D(r)` | ∫_{B(r)} \|∇u\|² |
//! | `K(r)` | ∫_{B(r)} u² |
//! | `N(r)` | r·D(r)/H(r), the frequency |
//! | `L(r)` | ∫_{S(r)} (∂_ν u)² |

mod perron;
mod profile;

pub use perron::{perron_solve, poisson_disk, DiskHarmonicExtension, PerronGrid, PerronResult, SweepRecord};
pub use profile::{
    doubling_check, frequency_profile, harnack_ratio, mean_value_residual, radial_energies, radial_identity_defects,
    three_sphere_check, vanishing_order, DoublingReport, FrequencyProfile, HarnackReport, MeanValueForm,
    ProfileQuadrature, RadialEnergies, ThreeSphereReport, VanishingOrder,
};

use nalgebra::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;
use thiserror::Error;

use crate::geometry::GeometryError;
use crate::operators::{OperatorError, ScalarField};
use crate::small::{frobenius, Mat3, Vec3, ZERO3, ZERO33};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HarmonicError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error("unsupported dimension {0}")]
    UnsupportedDimension(usize),
    #[error("ball of radius {radius} about the center leaves the domain (clearance {clearance})")]
    BallEscapesDomain { radius: f64, clearance: f64 },
    #[error("field is not certified harmonic (max scaled |Δu| = {certificate:e})")]
    NotHarmonic { certificate: f64 },
    #[error("field is not positive: value {value:e} at {point:?}")]
    NotPositive { point: Vec<f64>, value: f64 },
    #[error("field vanishes at every radius: numerically infinite order")]
    DegenerateFit,
    #[error("point lies on or outside the circle")]
    PointOnBoundary,
    #[error("no convergence after {sweeps} sweeps (last update {last_update:e})")]
    NonConvergence { sweeps: usize, last_update: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// Harmonicity threshold on 100 probes, relative to max(1, ‖∇²u‖).
pub const HARMONIC_TOLERANCE: f64 = 1e-9;

/// A field declared harmonic, with its probe certificate.
#[derive(Clone)]
pub struct HarmonicSample {
    pub label: String,
    pub field: Arc<dyn ScalarField>,
    /// Degree when the field is a homogeneous polynomial about `homogeneous_center`.
    pub degree: Option<u32>,
    pub homogeneous_center: Option<Vec<f64>>,
    /// Largest |Δu| / max(1, ‖∇²u‖_F) over the probes.
    pub certificate: f64,
}

impl std::fmt::Debug for HarmonicSample {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HarmonicSample")
            .field("label", &self.label)
            .field("degree", &self.degree)
            .field("certificate", &self.certificate)
            .finish_non_exhaustive()
    }
}

impl HarmonicSample {
    /// Certifies `field` on 100 random probes in B(probe_center, probe_radius).
    ///
    /// The field must supply an analytic Hessian.
    pub fn certify(
        label: &str,
        field: Arc<dyn ScalarField>,
        probe_center: &[f64],
        probe_radius: f64,
    ) -> Result<Self, HarmonicError> {
        let n = field.dim();
        let mut rng = ChaCha8Rng::seed_from_u64(0x4a2b);
        let mut worst = 0.0f64;
        let mut probes = 0;
        while probes < 100 {
            let p: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            if crate::small::norm(&p) > 1.0 {
                continue;
            }
            let x: Vec<f64> = p.iter().zip(probe_center).map(|(a, c)| c + probe_radius * a).collect();
            let h = field.hessian(&x).ok_or(OperatorError::MissingDerivatives)?;
            let lap: f64 = (0..n).map(|i| h[i][i]).sum();
            worst = worst.max(lap.abs() / frobenius(&h, n).max(1.0));
            probes += 1;
        }
        if !(worst <= HARMONIC_TOLERANCE) {
            return Err(HarmonicError::NotHarmonic { certificate: worst });
        }
        Ok(HarmonicSample {
            label: label.to_string(),
            field,
            degree: None,
            homogeneous_center: None,
            certificate: worst,
        })
    }

    pub fn homogeneous(mut self, degree: u32, center: &[f64]) -> Self {
        self.degree = Some(degree);
        self.homogeneous_center = Some(center.to_vec());
        self
    }

    pub fn dim(&self) -> usize {
        self.field.dim()
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.field.value(x)
    }
}

/// Polynomial Σ c·Π(x_d − o_d)^{e_d} with exact derivatives.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    dim: usize,
    origin: Vec3,
    terms: Vec<(f64, [u32; 3])>,
}

impl Polynomial {
    pub fn new(dim: usize, terms: Vec<(f64, [u32; 3])>) -> Self {
        Polynomial {
            dim,
            origin: ZERO3,
            terms,
        }
    }

    /// The same polynomial in the variable x − origin.
    pub fn translated(mut self, origin: &[f64]) -> Self {
        self.origin = crate::small::pad(origin);
        self
    }

    pub fn terms(&self) -> &[(f64, [u32; 3])] {
        &self.terms
    }

    fn eval(&self, x: &[f64], deriv: [u32; 3]) -> f64 {
        let y = crate::small::sub(x, &self.origin[..self.dim]);
        self.terms
            .iter()
            .map(|(c, e)| {
                let mut v = *c;
                for d in 0..3 {
                    if deriv[d] > e[d] {
                        return 0.0;
                    }
                    for k in 0..deriv[d] {
                        v *= (e[d] - k) as f64;
                    }
                    v *= y[d].powi((e[d] - deriv[d]) as i32);
                }
                v
            })
            .sum()
    }
}

impl ScalarField for Polynomial {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.eval(x, [0, 0, 0])
    }

    fn gradient(&self, x: &[f64]) -> Option<Vec3> {
        let mut g = ZERO3;
        for (k, gk) in g.iter_mut().enumerate().take(self.dim) {
            let mut d = [0; 3];
            d[k] = 1;
            *gk = self.eval(x, d);
        }
        Some(g)
    }

    fn hessian(&self, x: &[f64]) -> Option<Mat3> {
        let mut h = ZERO33;
        for i in 0..self.dim {
            for j in i..self.dim {
                let mut d = [0; 3];
                d[i] += 1;
                d[j] += 1;
                h[i][j] = self.eval(x, d);
                h[j][i] = h[i][j];
            }
        }
        Some(h)
    }
}

/// Σ wᵢ uᵢ; derivatives are available when every part supplies them.
#[derive(Clone)]
pub struct LinearCombination {
    parts: Vec<(f64, Arc<dyn ScalarField>)>,
}

impl LinearCombination {
    pub fn new(parts: Vec<(f64, Arc<dyn ScalarField>)>) -> Self {
        LinearCombination { parts }
    }
}

impl ScalarField for LinearCombination {
    fn dim(&self) -> usize {
        self.parts.first().map_or(0, |p| p.1.dim())
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.parts.iter().map(|(w, u)| w * u.value(x)).sum()
    }

    fn gradient(&self, x: &[f64]) -> Option<Vec3> {
        let mut g = ZERO3;
        for (w, u) in &self.parts {
            let gu = u.gradient(x)?;
            for k in 0..3 {
                g[k] += w * gu[k];
            }
        }
        Some(g)
    }

    fn hessian(&self, x: &[f64]) -> Option<Mat3> {
        let mut h = ZERO33;
        for (w, u) in &self.parts {
            let hu = u.hessian(x)?;
            for i in 0..3 {
                for j in 0..3 {
                    h[i][j] += w * hu[i][j];
                }
            }
        }
        Some(h)
    }
}

type Holomorphic = Arc<dyn Fn(Complex<f64>) -> [Complex<f64>; 3] + Send + Sync>;

/// Re f(x₁ + ix₂) for a holomorphic f given with f′ and f″.
#[derive(Clone)]
pub struct RealPart {
    f: Holomorphic,
}

impl RealPart {
    pub fn new(f: impl Fn(Complex<f64>) -> [Complex<f64>; 3] + Send + Sync + 'static) -> Self {
        RealPart { f: Arc::new(f) }
    }

    /// Poisson kernel of B(center, radius) with pole at angle `angle`:
    /// Re((ζ + w)/(ζ − w)) with w = (z − center)/radius, positive in the disk.
    pub fn poisson_kernel(center: [f64; 2], radius: f64, angle: f64) -> Self {
        let zeta = Complex::from_polar(1.0, angle);
        let c = Complex::new(center[0], center[1]);
        RealPart::new(move |z| {
            let w = (z - c) / radius;
            let q = zeta - w;
            [(zeta + w) / q, 2.0 * zeta / (q * q) / radius, 4.0 * zeta / (q * q * q) / (radius * radius)]
        })
    }

    /// ln|x − pole|.
    pub fn log_distance(pole: [f64; 2]) -> Self {
        let p = Complex::new(pole[0], pole[1]);
        RealPart::new(move |z| {
            let w = z - p;
            [w.ln(), 1.0 / w, -1.0 / (w * w)]
        })
    }
}

impl ScalarField for RealPart {
    fn dim(&self) -> usize {
        2
    }

    fn value(&self, x: &[f64]) -> f64 {
        (self.f)(Complex::new(x[0], x[1]))[0].re
    }

    fn gradient(&self, x: &[f64]) -> Option<Vec3> {
        let d = (self.f)(Complex::new(x[0], x[1]))[1];
        Some([d.re, -d.im, 0.0])
    }

    fn hessian(&self, x: &[f64]) -> Option<Mat3> {
        let d = (self.f)(Complex::new(x[0], x[1]))[2];
        let mut h = ZERO33;
        h[0][0] = d.re;
        h[1][1] = -d.re;
        h[0][1] = -d.im;
        h[1][0] = -d.im;
        Some(h)
    }
}

/// 1/|x − pole| in ℝ³.
#[derive(Debug, Clone, PartialEq)]
pub struct InverseDistance {
    pub pole: [f64; 3],
}

impl ScalarField for InverseDistance {
    fn dim(&self) -> usize {
        3
    }

    fn value(&self, x: &[f64]) -> f64 {
        1.0 / crate::small::dist(x, &self.pole)
    }

    fn gradient(&self, x: &[f64]) -> Option<Vec3> {
        let d = crate::small::sub(x, &self.pole);
        let r = crate::small::norm(&d);
        Some(d.map(|v| -v / (r * r * r)))
    }

    fn hessian(&self, x: &[f64]) -> Option<Mat3> {
        let d = crate::small::sub(x, &self.pole);
        let r = crate::small::norm(&d);
        let (r3, r5) = (r.powi(3), r.powi(5));
        let mut h = ZERO33;
        for i in 0..3 {
            for j in 0..3 {
                h[i][j] = 3.0 * d[i] * d[j] / r5 - if i == j { 1.0 / r3 } else { 0.0 };
            }
        }
        Some(h)
    }
}

fn binomial(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Re zᵏ and Im zᵏ in ℝ² as polynomials in (x₁, x₂).
pub fn complex_power(k: u32) -> (Polynomial, Polynomial) {
    let (mut re, mut im) = (Vec::new(), Vec::new());
    for j in 0..=k {
        let c = binomial(k, j);
        let e = [k - j, j, 0];
        // (i x₂)ʲ contributes iʲ.
        match j % 4 {
            0 => re.push((c, e)),
            1 => im.push((c, e)),
            2 => re.push((-c, e)),
            _ => im.push((-c, e)),
        }
    }
    (Polynomial::new(2, re), Polynomial::new(2, im))
}

/// Solid harmonics in ℝ³ of degree ≤ 3, with labels.
fn solid_harmonics() -> Vec<(&'static str, u32, Polynomial)> {
    let p = |terms: &[(f64, [u32; 3])]| Polynomial::new(3, terms.to_vec());
    vec![
        ("1", 0, p(&[(1.0, [0, 0, 0])])),
        ("x", 1, p(&[(1.0, [1, 0, 0])])),
        ("y", 1, p(&[(1.0, [0, 1, 0])])),
        ("z", 1, p(&[(1.0, [0, 0, 1])])),
        ("xy", 2, p(&[(1.0, [1, 1, 0])])),
        ("yz", 2, p(&[(1.0, [0, 1, 1])])),
        ("xz", 2, p(&[(1.0, [1, 0, 1])])),
        ("x2-y2", 2, p(&[(1.0, [2, 0, 0]), (-1.0, [0, 2, 0])])),
        ("x2+y2-2z2", 2, p(&[(1.0, [2, 0, 0]), (1.0, [0, 2, 0]), (-2.0, [0, 0, 2])])),
        ("xyz", 3, p(&[(1.0, [1, 1, 1])])),
        ("x3-3xy2", 3, p(&[(1.0, [3, 0, 0]), (-3.0, [1, 2, 0])])),
        ("3x2y-y3", 3, p(&[(3.0, [2, 1, 0]), (-1.0, [0, 3, 0])])),
        ("zx2-zy2", 3, p(&[(1.0, [2, 0, 1]), (-1.0, [0, 2, 1])])),
        ("x(4z2-x2-y2)", 3, p(&[(4.0, [1, 0, 2]), (-1.0, [3, 0, 0]), (-1.0, [1, 2, 0])])),
        ("y(4z2-x2-y2)", 3, p(&[(4.0, [0, 1, 2]), (-1.0, [2, 1, 0]), (-1.0, [0, 3, 0])])),
        ("z(2z2-3x2-3y2)", 3, p(&[(2.0, [0, 0, 3]), (-3.0, [2, 0, 1]), (-3.0, [0, 2, 1])])),
    ]
}

/// Offset used for the translated copies of the 3D solid harmonics.
pub const TRANSLATE_OFFSET: [f64; 3] = [0.25, -0.15, 0.1];

/// Certified harmonic polynomials.
///
/// 2D: 1, Re zᵏ, Im zᵏ for 1 ≤ k ≤ `max_degree` (at most 8).
/// 3D: solid harmonics of degree ≤ min(3, `max_degree`), each also
/// translated to [`TRANSLATE_OFFSET`].
pub fn harmonic_catalog(n: usize, max_degree: u32) -> Result<Vec<HarmonicSample>, HarmonicError> {
    if max_degree > 8 {
        return Err(HarmonicError::InvalidArgument(format!("max_degree {max_degree} exceeds 8")));
    }
    let mut out = Vec::new();
    match n {
        2 => {
            let one = Polynomial::new(2, vec![(1.0, [0, 0, 0])]);
            out.push(HarmonicSample::certify("1", Arc::new(one), &[0.0, 0.0], 1.0)?.homogeneous(0, &[0.0, 0.0]));
            for k in 1..=max_degree {
                let (re, im) = complex_power(k);
                for (name, poly) in [(format!("re_z{k}"), re), (format!("im_z{k}"), im)] {
                    let s = HarmonicSample::certify(&name, Arc::new(poly), &[0.0, 0.0], 1.0)?;
                    out.push(s.homogeneous(k, &[0.0, 0.0]));
                }
            }
        }
        3 => {
            let origin = [0.0; 3];
            for (name, deg, poly) in solid_harmonics().into_iter().filter(|e| e.1 <= max_degree) {
                let s = HarmonicSample::certify(name, Arc::new(poly.clone()), &origin, 1.0)?;
                out.push(s.homogeneous(deg, &origin));
                if deg > 0 {
                    let label = format!("{name}@translate");
                    let t = poly.translated(&TRANSLATE_OFFSET);
                    let s = HarmonicSample::certify(&label, Arc::new(t), &origin, 1.0)?;
                    out.push(s.homogeneous(deg, &TRANSLATE_OFFSET));
                }
            }
        }
        _ => return Err(HarmonicError::UnsupportedDimension(n)),
    }
    Ok(out)
}
