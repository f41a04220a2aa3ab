use rayon::prelude::*;
use serde::Serialize;

use super::{HarmonicError, HarmonicSample, HARMONIC_TOLERANCE};
use crate::geometry::{ball_quadrature, sphere_quadrature, Domain};
use crate::operators::{gradient, FiniteDifference, ScalarField};
use crate::small::{ball_volume, dist, unit_sphere_area};

/// Orders of the ball and sphere rules used for radial energies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProfileQuadrature {
    pub radial: usize,
    pub angular: usize,
}

impl ProfileQuadrature {
    /// 24 × 64 in 2D (exact to degree 46); 16 × 16 in 3D (exact to degree 29).
    pub fn for_dim(n: usize) -> Self {
        if n == 2 {
            ProfileQuadrature { radial: 24, angular: 64 }
        } else {
            ProfileQuadrature { radial: 16, angular: 16 }
        }
    }
}

/// The five radial quantities at one radius, with D also from the flux.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RadialEnergies {
    pub r: f64,
    pub h: f64,
    pub d: f64,
    /// ∫_{S(r)} u ∂_ν u, equal to D for harmonic u.
    pub d_flux: f64,
    pub k: f64,
    pub l: f64,
}

impl RadialEnergies {
    pub fn frequency(&self) -> f64 {
        self.r * self.d / self.h
    }
}

pub fn radial_energies(
    u: &dyn ScalarField,
    center: &[f64],
    r: f64,
    quad: ProfileQuadrature,
) -> Result<RadialEnergies, HarmonicError> {
    let fd = FiniteDifference::default();
    let n = center.len();
    let sphere = sphere_quadrature(center, r, quad.angular)?;
    let ball = ball_quadrature(center, r, quad.radial, quad.angular)?;
    let (mut h, mut d_flux, mut l) = (0.0, 0.0, 0.0);
    for i in 0..sphere.len() {
        let x = sphere.node(i);
        let w = sphere.weight(i);
        let v = u.value(x);
        let g = gradient(u, x, &fd)?;
        let dn: f64 = (0..n).map(|k| g[k] * (x[k] - center[k]) / r).sum();
        h += w * v * v;
        d_flux += w * v * dn;
        l += w * dn * dn;
    }
    let (mut d, mut k) = (0.0, 0.0);
    for i in 0..ball.len() {
        let x = ball.node(i);
        let w = ball.weight(i);
        let v = u.value(x);
        let g = gradient(u, x, &fd)?;
        d += w * (0..n).map(|j| g[j] * g[j]).sum::<f64>();
        k += w * v * v;
    }
    Ok(RadialEnergies { r, h, d, d_flux, k, l })
}

fn check_ball(domain: Option<&Domain>, center: &[f64], radius: f64) -> Result<(), HarmonicError> {
    if let Some(dom) = domain {
        let clearance = dom.signed_distance(center);
        if clearance < radius {
            return Err(HarmonicError::BallEscapesDomain { radius, clearance });
        }
    }
    Ok(())
}

fn check_sample(u: &HarmonicSample) -> Result<(), HarmonicError> {
    if !(u.certificate <= HARMONIC_TOLERANCE) {
        return Err(HarmonicError::NotHarmonic {
            certificate: u.certificate,
        });
    }
    Ok(())
}

fn check_dim(u: &dyn ScalarField, center: &[f64]) -> Result<(), HarmonicError> {
    match u.dim() {
        2 | 3 if center.len() == u.dim() => Ok(()),
        2 | 3 => Err(HarmonicError::InvalidArgument("center dimension differs from the field".into())),
        n => Err(HarmonicError::UnsupportedDimension(n)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MeanValueForm {
    Sphere,
    Ball,
}

/// |average of u over S(ξ,r) or B(ξ,r) − u(ξ)|.
///
/// The ball average divides by the true volume |S¹|rⁿ/n.
pub fn mean_value_residual(
    u: &dyn ScalarField,
    center: &[f64],
    r: f64,
    form: MeanValueForm,
    domain: Option<&Domain>,
) -> Result<f64, HarmonicError> {
    check_dim(u, center)?;
    check_ball(domain, center, r)?;
    let n = center.len();
    let q = ProfileQuadrature::for_dim(n);
    let mean = match form {
        MeanValueForm::Sphere => {
            sphere_quadrature(center, r, q.angular)?.integrate(|x| u.value(x)) / (unit_sphere_area(n) * r.powi(n as i32 - 1))
        }
        MeanValueForm::Ball => {
            ball_quadrature(center, r, q.radial, q.angular)?.integrate(|x| u.value(x)) / ball_volume(n, r)
        }
    };
    Ok((mean - u.value(center)).abs())
}

/// Radial energies of a harmonic sample on an increasing radius grid.
#[derive(Debug, Clone, Serialize)]
pub struct FrequencyProfile {
    pub center: Vec<f64>,
    pub dim: usize,
    pub rows: Vec<RadialEnergies>,
    /// Indices of radii where H or K vanish; N is reported as zero there.
    pub flagged: Vec<usize>,
}

impl FrequencyProfile {
    pub fn radii(&self) -> Vec<f64> {
        self.rows.iter().map(|e| e.r).collect()
    }

    pub fn frequencies(&self) -> Vec<f64> {
        self.rows
            .iter()
            .map(|e| if e.h > 0.0 { e.frequency() } else { 0.0 })
            .collect()
    }

    /// Largest |D − ∫u∂_ν u| / D over the grid (zero where D vanishes).
    pub fn flux_defect(&self) -> f64 {
        self.rows
            .iter()
            .map(|e| if e.d > 0.0 { (e.d - e.d_flux).abs() / e.d } else { e.d_flux.abs() })
            .fold(0.0, f64::max)
    }

    /// Largest decrease N(rᵢ) − N(rᵢ₊₁), negative when strictly increasing.
    pub fn max_frequency_drop(&self) -> f64 {
        self.frequencies()
            .windows(2)
            .map(|w| w[0] - w[1])
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Largest K − rH, relative to rH.
    pub fn ball_sphere_excess(&self) -> f64 {
        self.rows
            .iter()
            .map(|e| (e.k - e.r * e.h) / (e.r * e.h).max(f64::MIN_POSITIVE))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Largest D² − LH, relative to LH.
    pub fn cauchy_schwarz_excess(&self) -> f64 {
        self.rows
            .iter()
            .map(|e| (e.d * e.d - e.l * e.h) / (e.l * e.h).max(f64::MIN_POSITIVE))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// CSV with columns r,H,D,K,N,L.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("r,H,D,K,N,L\n");
        for (e, n) in self.rows.iter().zip(self.frequencies()) {
            out.push_str(&format!("{},{},{},{},{},{}\n", e.r, e.h, e.d, e.k, n, e.l));
        }
        out
    }
}

pub fn frequency_profile(
    u: &HarmonicSample,
    center: &[f64],
    radii: &[f64],
    domain: Option<&Domain>,
) -> Result<FrequencyProfile, HarmonicError> {
    check_sample(u)?;
    check_dim(&*u.field, center)?;
    if radii.is_empty() || radii[0] <= 0.0 || radii.windows(2).any(|w| w[1] <= w[0]) {
        return Err(HarmonicError::InvalidArgument("radii must be positive and increasing".into()));
    }
    check_ball(domain, center, *radii.last().unwrap())?;
    let q = ProfileQuadrature::for_dim(center.len());
    let rows: Vec<RadialEnergies> = radii
        .par_iter()
        .map(|&r| radial_energies(&*u.field, center, r, q))
        .collect::<Result<_, _>>()?;
    let flagged = rows
        .iter()
        .enumerate()
        .filter(|(_, e)| !(e.h > 0.0 && e.k > 0.0))
        .map(|(i, _)| i)
        .collect();
    Ok(FrequencyProfile {
        center: center.to_vec(),
        dim: center.len(),
        rows,
        flagged,
    })
}

/// Relative defects of H′ = (n−1)H/r + 2D and D′ = (n−2)D/r + 2L at r.
///
/// Derivatives are central differences with one Richardson step.
pub fn radial_identity_defects(u: &HarmonicSample, center: &[f64], r: f64) -> Result<(f64, f64), HarmonicError> {
    check_sample(u)?;
    check_dim(&*u.field, center)?;
    let q = ProfileQuadrature::for_dim(center.len());
    let n = center.len() as f64;
    let at = |s: f64| radial_energies(&*u.field, center, s, q);
    let e = at(r)?;
    let step = 1e-2 * r;
    let deriv = |pick: fn(&RadialEnergies) -> f64| -> Result<f64, HarmonicError> {
        let central = |s: f64| -> Result<f64, HarmonicError> { Ok((pick(&at(r + s)?) - pick(&at(r - s)?)) / (2.0 * s)) };
        Ok((4.0 * central(0.5 * step)? - central(step)?) / 3.0)
    };
    let dh = deriv(|e| e.h)?;
    let dd = deriv(|e| e.d)?;
    let h_rhs = (n - 1.0) * e.h / r + 2.0 * e.d;
    let d_rhs = (n - 2.0) * e.d / r + 2.0 * e.l;
    let rel = |a: f64, b: f64| if b.abs() > 0.0 { (a - b).abs() / b.abs() } else { a.abs() };
    Ok((rel(dh, h_rhs), rel(dd, d_rhs)))
}

#[derive(Debug, Clone, Serialize)]
pub struct DoublingReport {
    pub r: f64,
    pub r_bar: f64,
    /// K(2r)/K(r).
    pub ratio: f64,
    pub frequency_at_r_bar: f64,
    /// 2^{2N(r̄)+n}.
    pub bound: f64,
    pub tolerance: f64,
    pub holds: bool,
}

/// K(2r) ≤ 2^{2N(r̄)+n} K(r), checked with relative slack `tolerance`.
pub fn doubling_check(
    u: &HarmonicSample,
    center: &[f64],
    r: f64,
    r_bar: f64,
    domain: Option<&Domain>,
) -> Result<DoublingReport, HarmonicError> {
    check_sample(u)?;
    check_dim(&*u.field, center)?;
    if !(r > 0.0 && 2.0 * r <= r_bar * (1.0 + 1e-12)) {
        return Err(HarmonicError::InvalidArgument("need 0 < 2r ≤ r̄".into()));
    }
    check_ball(domain, center, r_bar)?;
    let q = ProfileQuadrature::for_dim(center.len());
    let small = radial_energies(&*u.field, center, r, q)?;
    let double = radial_energies(&*u.field, center, 2.0 * r, q)?;
    let top = radial_energies(&*u.field, center, r_bar, q)?;
    if !(small.k > 0.0) {
        return Err(HarmonicError::DegenerateFit);
    }
    let ratio = double.k / small.k;
    let frequency_at_r_bar = top.frequency();
    let bound = 2f64.powf(2.0 * frequency_at_r_bar + center.len() as f64);
    let tolerance = 1e-6;
    Ok(DoublingReport {
        r,
        r_bar,
        ratio,
        frequency_at_r_bar,
        bound,
        tolerance,
        holds: ratio <= bound * (1.0 + tolerance),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ThreeSphereReport {
    pub radii: [f64; 3],
    /// ln(r₂/r₁)/ln(r₃/r₁).
    pub theta: f64,
    /// ln of the right side minus ln of the left side of
    /// H(r₂)/r₂^{n−1} ≤ (H(r₃)/r₃^{n−1})^θ (H(r₁)/r₁^{n−1})^{1−θ}.
    pub log_convexity_slack: f64,
    pub tolerance: f64,
    pub holds: bool,
    /// (r₂−r₁)/(r₃−r₁).
    pub alpha: f64,
    /// ln‖u‖_{B(r₂)} − ln(‖u‖_{B(r₃)}^α ‖u‖_{B(r₁)}^{1−α}); positive means the
    /// arithmetic ball form fails. Reported only.
    pub arithmetic_ball_defect: f64,
    /// Same for the sphere form with factors (r₂/r₃)^{(n+1)α}(r₂/r₁)^{(n+1)(1−α)}.
    pub arithmetic_sphere_defect: f64,
}

/// Log-convexity of H(r)/r^{n−1} in ln r, plus the arithmetic-radius forms.
pub fn three_sphere_check(
    u: &HarmonicSample,
    center: &[f64],
    radii: [f64; 3],
    domain: Option<&Domain>,
) -> Result<ThreeSphereReport, HarmonicError> {
    check_sample(u)?;
    check_dim(&*u.field, center)?;
    let [r1, r2, r3] = radii;
    if !(0.0 < r1 && r1 < r2 && r2 < r3) {
        return Err(HarmonicError::InvalidArgument("need 0 < r₁ < r₂ < r₃".into()));
    }
    check_ball(domain, center, r3)?;
    let q = ProfileQuadrature::for_dim(center.len());
    let e: Vec<RadialEnergies> = radii
        .iter()
        .map(|&r| radial_energies(&*u.field, center, r, q))
        .collect::<Result<_, _>>()?;
    if e.iter().any(|x| !(x.h > 0.0 && x.k > 0.0)) {
        return Err(HarmonicError::DegenerateFit);
    }
    let n = center.len() as f64;
    let lh: Vec<f64> = e.iter().map(|x| x.h.ln() - (n - 1.0) * x.r.ln()).collect();
    let theta = (r2 / r1).ln() / (r3 / r1).ln();
    let log_convexity_slack = theta * lh[2] + (1.0 - theta) * lh[0] - lh[1];
    let tolerance = 1e-8 * (1.0 + lh[1].abs());
    let alpha = (r2 - r1) / (r3 - r1);
    let lk: Vec<f64> = e.iter().map(|x| 0.5 * x.k.ln()).collect();
    let arithmetic_ball_defect = lk[1] - (alpha * lk[2] + (1.0 - alpha) * lk[0]);
    let ls: Vec<f64> = e.iter().map(|x| 0.5 * x.h.ln()).collect();
    let factor = (n + 1.0) * (alpha * (r2 / r3).ln() + (1.0 - alpha) * (r2 / r1).ln());
    let arithmetic_sphere_defect = ls[1] - (factor + alpha * ls[2] + (1.0 - alpha) * ls[0]);
    Ok(ThreeSphereReport {
        radii,
        theta,
        log_convexity_slack,
        tolerance,
        holds: log_convexity_slack >= -tolerance,
        alpha,
        arithmetic_ball_defect,
        arithmetic_sphere_defect,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct HarnackReport {
    pub r: f64,
    pub max: f64,
    pub min: f64,
    pub ratio: f64,
    /// 3ⁿ.
    pub bound: f64,
    pub probes: usize,
    pub holds: bool,
}

/// max/min of a positive field over B̄(ξ, r), compared with 3ⁿ.
///
/// Positivity is checked on a grid of spacing r/50 over B(ξ, 4r); the ratio
/// uses the same grid on B̄(ξ, r) plus 400 points on the sphere.
pub fn harnack_ratio(
    u: &dyn ScalarField,
    center: &[f64],
    r: f64,
    domain: Option<&Domain>,
) -> Result<HarnackReport, HarmonicError> {
    check_dim(u, center)?;
    if !(r > 0.0) {
        return Err(HarmonicError::InvalidArgument("radius must be positive".into()));
    }
    check_ball(domain, center, 4.0 * r)?;
    let n = center.len();
    let h = r / 50.0;
    if let Some((value, point)) = lattice_minimum(u, center, 4.0 * r, h).filter(|m| !(m.0 > 0.0)) {
        return Err(HarmonicError::NotPositive { point, value });
    }
    let mut inner = Vec::new();
    for_lattice(center, r, h, |x| inner.push(x.to_vec()));
    let sphere = sphere_quadrature(center, r, if n == 2 { 400 } else { 15 })?;
    inner.extend((0..sphere.len()).map(|i| sphere.node(i).to_vec()));
    let values: Vec<f64> = inner.par_iter().map(|x| u.value(x)).collect();
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let bound = 3f64.powi(n as i32);
    Ok(HarnackReport {
        r,
        max,
        min,
        ratio: max / min,
        bound,
        probes: values.len(),
        holds: max / min <= bound,
    })
}

/// Visits the points of the lattice ξ + hℤⁿ inside the closed ball B̄(ξ, radius).
fn for_lattice(center: &[f64], radius: f64, h: f64, mut visit: impl FnMut(&[f64])) {
    let n = center.len();
    let reach = (radius / h).round() as i64;
    let mut idx = vec![-reach; n];
    let mut x = vec![0.0; n];
    loop {
        for d in 0..n {
            x[d] = center[d] + h * idx[d] as f64;
        }
        if dist(&x, center) <= radius * (1.0 + 1e-12) {
            visit(&x);
        }
        let mut d = 0;
        while d < n {
            idx[d] += 1;
            if idx[d] <= reach {
                break;
            }
            idx[d] = -reach;
            d += 1;
        }
        if d == n {
            return;
        }
    }
}

/// Smallest value of u on the lattice of spacing h in B̄(ξ, radius), split
/// into slabs along the first axis for parallel evaluation.
fn lattice_minimum(u: &dyn ScalarField, center: &[f64], radius: f64, h: f64) -> Option<(f64, Vec<f64>)> {
    let reach = (radius / h).round() as i64;
    (-reach..=reach)
        .into_par_iter()
        .filter_map(|i| {
            let mut slab_center = center.to_vec();
            slab_center[0] += h * i as f64;
            let offset = h * i as f64;
            let slab_radius2 = radius * radius * (1.0 + 1e-12) - offset * offset;
            if slab_radius2 < 0.0 {
                return None;
            }
            let mut best: Option<(f64, Vec<f64>)> = None;
            let sub_reach = (slab_radius2.sqrt() / h).floor() as i64;
            let m = center.len();
            let mut idx = vec![-sub_reach; m - 1];
            let mut x = slab_center.clone();
            loop {
                for d in 1..m {
                    x[d] = center[d] + h * idx[d - 1] as f64;
                }
                if dist(&x, center) <= radius * (1.0 + 1e-12) {
                    let v = u.value(&x);
                    if best.as_ref().is_none_or(|b| v < b.0 || v.is_nan()) {
                        best = Some((v, x.clone()));
                    }
                }
                let mut d = 0;
                while d < m - 1 {
                    idx[d] += 1;
                    if idx[d] <= sub_reach {
                        break;
                    }
                    idx[d] = -sub_reach;
                    d += 1;
                }
                if d == m - 1 {
                    break;
                }
            }
            best
        })
        .min_by(|a, b| a.0.total_cmp(&b.0))
}

#[derive(Debug, Clone, Serialize)]
pub struct VanishingOrder {
    /// (s − n)/2 for the fitted slope s of ln K against ln r.
    pub order: f64,
    pub slope: f64,
    pub fit_rms: f64,
}

/// Order of vanishing at ξ from the growth K(r) = O(r^{n+2N}).
pub fn vanishing_order(u: &dyn ScalarField, center: &[f64], radii: &[f64]) -> Result<VanishingOrder, HarmonicError> {
    check_dim(u, center)?;
    if radii.len() < 2 || radii.iter().any(|r| !(*r > 0.0)) {
        return Err(HarmonicError::InvalidArgument("need at least two positive radii".into()));
    }
    let (lo, hi) = radii
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(a, b), &r| (a.min(r), b.max(r)));
    if hi / lo < 10.0 * (1.0 - 1e-12) {
        return Err(HarmonicError::InvalidArgument("radii must span at least one decade".into()));
    }
    let q = ProfileQuadrature::for_dim(center.len());
    let ks: Vec<f64> = radii
        .iter()
        .map(|&r| radial_energies(u, center, r, q).map(|e| e.k))
        .collect::<Result<_, _>>()?;
    const FLOOR: f64 = 1e-280;
    let pairs: Vec<(f64, f64)> = radii
        .iter()
        .zip(&ks)
        .filter(|(_, k)| **k > FLOOR)
        .map(|(r, k)| (r.ln(), k.ln()))
        .collect();
    if pairs.len() < 2 {
        return Err(HarmonicError::DegenerateFit);
    }
    let (x, y): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    let (slope, _, fit_rms) = crate::linalg::linear_fit(&x, &y);
    Ok(VanishingOrder {
        order: (slope - center.len() as f64) / 2.0,
        slope,
        fit_rms,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harmonic::{harmonic_catalog, Polynomial, RealPart};
    use std::f64::consts::PI;
    use std::sync::Arc;

    #[test]
    fn mean_value_of_quadratic_examples() {
        let cat = harmonic_catalog(2, 2).unwrap();
        let re_z2 = cat.iter().find(|s| s.label == "re_z2").unwrap();
        for r in [0.1, 0.5, 2.0] {
            for form in [MeanValueForm::Sphere, MeanValueForm::Ball] {
                assert!(mean_value_residual(&*re_z2.field, &[0.0, 0.0], r, form, None).unwrap() <= 1e-12);
            }
        }
        let r2 = Polynomial::new(2, vec![(1.0, [2, 0, 0]), (1.0, [0, 2, 0])]);
        let res = mean_value_residual(&r2, &[0.0, 0.0], 0.3, MeanValueForm::Sphere, None).unwrap();
        assert!((res - 0.09).abs() < 1e-14);
        let sq = Domain::unit_square();
        assert!(matches!(
            mean_value_residual(&r2, &[0.5, 0.5], 0.6, MeanValueForm::Ball, Some(&sq)),
            Err(HarmonicError::BallEscapesDomain { .. })
        ));
    }

    #[test]
    fn linear_function_sphere_energy() {
        let cat = harmonic_catalog(2, 1).unwrap();
        let x1 = cat.iter().find(|s| s.label == "re_z1").unwrap();
        let e = radial_energies(&*x1.field, &[0.0, 0.0], 0.7, ProfileQuadrature::for_dim(2)).unwrap();
        assert!((e.h - PI * 0.7f64.powi(3)).abs() < 1e-13);
    }

    #[test]
    fn homogeneous_frequency_is_degree() {
        for s in harmonic_catalog(2, 6).unwrap() {
            let p = frequency_profile(&s, &[0.0, 0.0], &[0.1, 0.4, 0.9], None).unwrap();
            let k = s.degree.unwrap() as f64;
            assert!(p.frequencies().iter().all(|n| (n - k).abs() < 1e-10), "{}", s.label);
            assert!(p.flux_defect() < 1e-10);
            assert!(p.ball_sphere_excess() <= 1e-12);
            assert!(p.cauchy_schwarz_excess() <= 1e-10);
        }
    }

    #[test]
    fn radial_identities_hold() {
        let f = RealPart::poisson_kernel([0.0, 0.0], 1.0, 0.4);
        let s = HarmonicSample::certify("p", Arc::new(f), &[0.0, 0.0], 0.5).unwrap();
        let (dh, dd) = radial_identity_defects(&s, &[0.1, 0.0], 0.3).unwrap();
        assert!(dh < 1e-5 && dd < 1e-5, "{dh} {dd}");
    }

    #[test]
    fn doubling_equality_for_homogeneous() {
        let cat = harmonic_catalog(2, 3).unwrap();
        let s = cat.iter().find(|s| s.label == "im_z3").unwrap();
        let rep = doubling_check(s, &[0.0, 0.0], 0.2, 0.5, None).unwrap();
        assert!((rep.ratio / 2f64.powi(8) - 1.0).abs() < 1e-10);
        assert!((rep.bound / rep.ratio - 1.0).abs() < 1e-8 && rep.holds);
    }

    #[test]
    fn three_sphere_equality_and_mixture() {
        let cat = harmonic_catalog(2, 4).unwrap();
        let s = cat.iter().find(|s| s.label == "re_z2").unwrap();
        let rep = three_sphere_check(s, &[0.0, 0.0], [0.1, 0.3, 0.8], None).unwrap();
        assert!(rep.log_convexity_slack.abs() < 1e-10 && rep.holds);
        let (re1, _) = crate::harmonic::complex_power(1);
        let (re4, _) = crate::harmonic::complex_power(4);
        let mix = crate::harmonic::LinearCombination::new(vec![(1.0, Arc::new(re1)), (0.3, Arc::new(re4))]);
        let m = HarmonicSample::certify("mix", Arc::new(mix), &[0.0, 0.0], 1.0).unwrap();
        let rep = three_sphere_check(&m, &[0.0, 0.0], [0.1, 0.3, 0.8], None).unwrap();
        assert!(rep.log_convexity_slack > 0.0);
    }

    #[test]
    fn harnack_affine_example() {
        let u = Polynomial::new(2, vec![(1.0, [1, 0, 0]), (2.0, [0, 0, 0])]);
        let disk = Domain::disk([0.0, 0.0], 1.5).unwrap();
        let rep = harnack_ratio(&u, &[0.0, 0.0], 0.25, Some(&disk)).unwrap();
        assert!((rep.ratio - 9.0 / 7.0).abs() < 1e-12 && rep.holds);
        let v = Polynomial::new(2, vec![(1.0, [1, 0, 0]), (0.5, [0, 0, 0])]);
        assert!(matches!(harnack_ratio(&v, &[0.0, 0.0], 0.25, Some(&disk)), Err(HarmonicError::NotPositive { .. })));
    }

    #[test]
    fn vanishing_orders() {
        let radii: Vec<f64> = (0..8).map(|i| 0.01 * 10f64.powf(i as f64 / 7.0)).collect();
        let (re3, _) = crate::harmonic::complex_power(3);
        assert!((vanishing_order(&re3, &[0.0, 0.0], &radii).unwrap().order - 3.0).abs() < 0.05);
        let one_plus = Polynomial::new(2, vec![(1.0, [0, 0, 0]), (1.0, [1, 0, 0])]);
        assert!(vanishing_order(&one_plus, &[0.0, 0.0], &radii).unwrap().order.abs() < 0.05);
        let zero = Polynomial::new(2, vec![]);
        assert_eq!(vanishing_order(&zero, &[0.0, 0.0], &radii).unwrap_err(), HarmonicError::DegenerateFit);
    }
}
