use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use super::StabilityError;
use crate::geometry::{ball_quadrature, gauss_legendre, Domain};
use crate::linalg::linear_fit;
use crate::operators::{apply, gradient, Bump, EllipticOperator, FnField, ScalarField};
use crate::small::{dist, norm, Vec3, ZERO3};

/// Weight function φ of a Carleman estimate.
#[derive(Clone)]
pub enum WeightFamily {
    /// φ = e^{λψ}.
    Exponential { psi: Arc<dyn ScalarField> },
    /// φ = (x_n − 1)² + |x′|².
    Quadratic,
}

#[derive(Clone)]
pub struct CarlemanWeight {
    pub family: WeightFamily,
    pub lambda: f64,
}

impl CarlemanWeight {
    pub fn exponential(psi: Arc<dyn ScalarField>, lambda: f64) -> Self {
        CarlemanWeight {
            family: WeightFamily::Exponential { psi },
            lambda,
        }
    }

    /// φ = e^{λψ} with ψ = 9 − |x|².
    pub fn standard(dim: usize, lambda: f64) -> Self {
        let psi = FnField::new(dim, |x| 9.0 - x.iter().map(|v| v * v).sum::<f64>()).with_gradient(|x| {
            let mut g = ZERO3;
            for (k, v) in x.iter().enumerate() {
                g[k] = -2.0 * v;
            }
            g
        });
        Self::exponential(Arc::new(psi), lambda)
    }

    pub fn quadratic() -> Self {
        CarlemanWeight {
            family: WeightFamily::Quadratic,
            lambda: 1.0,
        }
    }

    pub fn name(&self) -> &'static str {
        match self.family {
            WeightFamily::Exponential { .. } => "exponential",
            WeightFamily::Quadratic => "quadratic",
        }
    }

    pub fn phi(&self, x: &[f64]) -> f64 {
        match &self.family {
            WeightFamily::Exponential { psi } => (self.lambda * psi.value(x)).exp(),
            WeightFamily::Quadratic => {
                let n = x.len();
                let tangential: f64 = x[..n - 1].iter().map(|v| v * v).sum();
                (x[n - 1] - 1.0).powi(2) + tangential
            }
        }
    }

    fn psi_gradient(&self, x: &[f64]) -> Result<Option<Vec3>, StabilityError> {
        match &self.family {
            WeightFamily::Exponential { psi } => {
                let fd = crate::operators::FiniteDifference::default();
                Ok(Some(gradient(psi.as_ref(), x, &fd)?))
            }
            WeightFamily::Quadratic => Ok(None),
        }
    }
}

/// Ball containing the support of a field.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Support {
    pub center: Vec<f64>,
    pub radius: f64,
}

impl Support {
    pub fn of(bump: &Bump) -> Self {
        Support {
            center: bump.center.clone(),
            radius: bump.radius,
        }
    }
}

/// 4 / diam(Ω)².
pub fn default_tau0(domain: &Domain) -> f64 {
    4.0 / domain.diameter().powi(2)
}

/// `count` geometric points from τ₀ to 8τ₀.
pub fn tau_grid(tau0: f64, count: usize) -> Vec<f64> {
    if count <= 1 {
        return vec![tau0];
    }
    (0..count).map(|k| tau0 * 8f64.powf(k as f64 / (count - 1) as f64)).collect()
}

/// Both sides at one τ, scaled by e^{−S} with S the maximum of
/// 2τφ + ln v² over the support.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CarlemanPoint {
    pub tau: f64,
    pub log_scale: f64,
    pub lhs: f64,
    pub rhs: f64,
    /// RHS / LHS.
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CarlemanReport {
    pub weight: String,
    pub lambda: f64,
    pub phi_max: f64,
    pub points: Vec<CarlemanPoint>,
    /// d ln LHS / dτ of the unscaled sides, least squares over the grid.
    pub lhs_slope: f64,
    pub rhs_slope: f64,
}

impl CarlemanReport {
    pub fn min_ratio(&self) -> f64 {
        self.points.iter().map(|p| p.ratio).fold(f64::INFINITY, f64::min)
    }

    pub fn max_ratio(&self) -> f64 {
        self.points.iter().map(|p| p.ratio).fold(0.0, f64::max)
    }

    /// |s_L − s_R| / max(|s_L|, |s_R|).
    pub fn slope_mismatch(&self) -> f64 {
        (self.lhs_slope - self.rhs_slope).abs() / self.lhs_slope.abs().max(self.rhs_slope.abs())
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("tau,log_scale,lhs,rhs,ratio\n");
        for p in &self.points {
            s.push_str(&format!("{},{},{},{},{}\n", p.tau, p.log_scale, p.lhs, p.rhs, p.ratio));
        }
        s
    }
}

const PROBES_PER_AXIS: usize = 41;
const CUBATURE_TOLERANCE: f64 = 1e-9;
const MAX_BOXES: usize = 400_000;

/// Carleman sides ∫(λ⁴τ³φ³v² + λ²τφ|∇v|²)e^{2τφ} and ∫(Lv)²e^{2τφ} on a
/// τ grid, with globally adaptive cubature over the support box.
pub fn carleman_ratio(
    op: &EllipticOperator,
    domain: &Domain,
    v: &dyn ScalarField,
    support: &Support,
    weight: &CarlemanWeight,
    taus: &[f64],
) -> Result<CarlemanReport, StabilityError> {
    let n = op.dim();
    if v.dim() != n || support.center.len() != n || domain.dim() != n {
        return Err(StabilityError::InvalidArgument("dimension mismatch".into()));
    }
    if taus.is_empty() || taus.iter().any(|t| !(*t > 0.0)) || !(weight.lambda > 0.0) || !(support.radius > 0.0) {
        return Err(StabilityError::InvalidArgument("τ, λ and the support radius must be positive".into()));
    }
    if matches!(weight.family, WeightFamily::Quadratic) && n < 2 {
        return Err(StabilityError::InvalidArgument("quadratic weight needs dimension ≥ 2".into()));
    }
    let clearance = domain.signed_distance(&support.center) - support.radius;
    if clearance <= 0.0 {
        return Err(StabilityError::SupportTouchesBoundary { clearance });
    }

    let mut phi_max = f64::NEG_INFINITY;
    let mut v_max = 0.0f64;
    for x in probes(support) {
        phi_max = phi_max.max(weight.phi(&x));
        v_max = v_max.max(v.value(&x).abs());
        if let Some(g) = weight.psi_gradient(&x)? {
            if norm(&g[..n]) <= 1e-10 {
                return Err(StabilityError::CriticalPoint { point: x });
            }
        }
    }
    if v_max == 0.0 {
        return Err(StabilityError::DegenerateField);
    }

    let lam = weight.lambda;
    let fd = op.finite_difference();
    let probe_points = probes(support);
    let points: Result<Vec<CarlemanPoint>, StabilityError> = taus
        .par_iter()
        .map(|&tau| {
            let log_density = |x: &[f64]| -> f64 {
                if dist(x, &support.center) >= support.radius {
                    return f64::NEG_INFINITY;
                }
                let val = v.value(x).abs();
                if val == 0.0 {
                    return f64::NEG_INFINITY;
                }
                2.0 * tau * weight.phi(x) + 2.0 * val.ln()
            };
            let (peak, log_scale, width) = locate_peak(&log_density, &probe_points, support.radius);
            let integrand = |x: &[f64]| -> Result<[f64; 2], StabilityError> {
                if dist(x, &support.center) >= support.radius {
                    return Ok([0.0, 0.0]);
                }
                let phi = weight.phi(x);
                let e = (2.0 * tau * phi - log_scale).exp();
                let val = v.value(x);
                let g = gradient(v, x, &fd)?;
                let g2: f64 = g[..n].iter().map(|c| c * c).sum();
                let lv = apply(op, v, x)?;
                let lhs = (lam.powi(4) * tau.powi(3) * phi.powi(3) * val * val + lam * lam * tau * phi * g2) * e;
                Ok([lhs, lv * lv * e])
            };
            let [lhs, rhs] = adaptive_cubature(support, &integrand, &peak, width)?;
            if !(lhs > 0.0) {
                return Err(StabilityError::DegenerateField);
            }
            Ok(CarlemanPoint {
                tau,
                log_scale,
                lhs,
                rhs,
                ratio: rhs / lhs,
            })
        })
        .collect();
    let points = points?;

    let (lhs_slope, rhs_slope) = if points.len() >= 2 {
        let t: Vec<f64> = points.iter().map(|p| p.tau).collect();
        let ll: Vec<f64> = points.iter().map(|p| p.lhs.ln() + p.log_scale).collect();
        let lr: Vec<f64> = points.iter().map(|p| p.rhs.max(f64::MIN_POSITIVE).ln() + p.log_scale).collect();
        (linear_fit(&t, &ll).0, linear_fit(&t, &lr).0)
    } else {
        (f64::NAN, f64::NAN)
    };
    Ok(CarlemanReport {
        weight: weight.name().into(),
        lambda: lam,
        phi_max,
        points,
        lhs_slope,
        rhs_slope,
    })
}

/// Maximizer of a log density by pattern search from the best probe, the
/// maximum, and the smallest axis half-width at which it drops by one.
fn locate_peak(f: &dyn Fn(&[f64]) -> f64, probes: &[Vec<f64>], radius: f64) -> (Vec<f64>, f64, f64) {
    let mut best = probes[0].clone();
    let mut top = f64::NEG_INFINITY;
    for p in probes {
        let v = f(p);
        if v > top {
            top = v;
            best = p.clone();
        }
    }
    let n = best.len();
    let mut step = radius / 20.0;
    while step > 1e-12 * radius {
        let mut moved = false;
        for d in 0..n {
            for sign in [-1.0, 1.0] {
                let mut y = best.clone();
                y[d] += sign * step;
                let v = f(&y);
                if v > top {
                    top = v;
                    best = y;
                    moved = true;
                }
            }
        }
        if !moved {
            step *= 0.5;
        }
    }
    let mut width = radius;
    for d in 0..n {
        for sign in [-1.0, 1.0] {
            let drop = |t: f64| {
                let mut y = best.clone();
                y[d] += sign * t;
                top - f(&y) >= 1.0
            };
            let mut hi = 1e-9 * radius;
            while hi < radius && !drop(hi) {
                hi *= 2.0;
            }
            let mut lo = 0.5 * hi;
            for _ in 0..40 {
                let mid = 0.5 * (lo + hi);
                if drop(mid) {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            width = width.min(hi);
        }
    }
    (best, top, width)
}

/// Grid points of the support ball, its boundary included.
fn probes(support: &Support) -> Vec<Vec<f64>> {
    let n = support.center.len();
    let m = PROBES_PER_AXIS;
    let total = m.pow(n as u32);
    let mut out = Vec::new();
    for idx in 0..total {
        let mut rest = idx;
        let mut x = vec![0.0; n];
        for xd in x.iter_mut() {
            let k = rest % m;
            rest /= m;
            *xd = -1.0 + 2.0 * k as f64 / (m - 1) as f64;
        }
        let r = norm(&x);
        if r <= 1.0 {
            out.push(x.iter().zip(&support.center).map(|(a, c)| c + support.radius * a).collect());
        }
    }
    let angles = 256;
    if n == 2 {
        for k in 0..angles {
            let t = 2.0 * std::f64::consts::PI * k as f64 / angles as f64;
            out.push(vec![
                support.center[0] + support.radius * t.cos(),
                support.center[1] + support.radius * t.sin(),
            ]);
        }
    } else if n == 1 {
        out.push(vec![support.center[0] - support.radius]);
        out.push(vec![support.center[0] + support.radius]);
    }
    out
}

struct Cell {
    lower: Vec<f64>,
    upper: Vec<f64>,
    value: [f64; 2],
    gap: [f64; 2],
    error: f64,
}

impl PartialEq for Cell {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}

impl Eq for Cell {}

impl PartialOrd for Cell {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Cell {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Globally adaptive tensor Gauss cubature of a two-component integrand on
/// the bounding box of the support; error per box is the gap between the
/// 4- and 6-point product rules.
fn adaptive_cubature(
    support: &Support,
    f: &dyn Fn(&[f64]) -> Result<[f64; 2], StabilityError>,
    peak: &[f64],
    width: f64,
) -> Result<[f64; 2], StabilityError> {
    let n = support.center.len();
    let low = gauss_legendre(4, 0.0, 1.0)?;
    let high = gauss_legendre(6, 0.0, 1.0)?;
    let rule = |lower: &[f64], upper: &[f64], (nodes, weights): &(Vec<f64>, Vec<f64>)| -> Result<[f64; 2], StabilityError> {
        let m = nodes.len();
        let mut acc = [0.0; 2];
        let mut x = vec![0.0; n];
        for idx in 0..m.pow(n as u32) {
            let mut rest = idx;
            let mut w = 1.0;
            for d in 0..n {
                let k = rest % m;
                rest /= m;
                x[d] = lower[d] + (upper[d] - lower[d]) * nodes[k];
                w *= (upper[d] - lower[d]) * weights[k];
            }
            let v = f(&x)?;
            acc[0] += w * v[0];
            acc[1] += w * v[1];
        }
        Ok(acc)
    };
    let evaluate = |lower: Vec<f64>, upper: Vec<f64>| -> Result<Cell, StabilityError> {
        let a = rule(&lower, &upper, &low)?;
        let b = rule(&lower, &upper, &high)?;
        Ok(Cell {
            lower,
            upper,
            value: b,
            gap: [(a[0] - b[0]).abs(), (a[1] - b[1]).abs()],
            error: 0.0,
        })
    };

    let split: usize = 4;
    let lower: Vec<f64> = support.center.iter().map(|c| c - support.radius).collect();
    let side = 2.0 * support.radius / split as f64;
    let mut cells = Vec::new();
    for idx in 0..split.pow(n as u32) {
        let mut rest = idx;
        let mut lo = vec![0.0; n];
        let mut hi = vec![0.0; n];
        for d in 0..n {
            let k = rest % split;
            rest /= split;
            lo[d] = lower[d] + side * k as f64;
            hi[d] = lo[d] + side;
        }
        cells.push((lo, hi));
    }
    // Split boxes around the peak until they resolve its width, so the
    // error estimate cannot miss it.
    let mut done = Vec::new();
    while let Some((lo, hi)) = cells.pop() {
        let holds = (0..n).all(|d| peak[d] >= lo[d] - width && peak[d] <= hi[d] + width);
        if holds && hi[0] - lo[0] > width && done.len() + cells.len() < MAX_BOXES / 4 {
            cells.extend(bisect(&lo, &hi));
        } else {
            done.push((lo, hi));
        }
    }
    let cells: Result<Vec<Cell>, StabilityError> = done.into_iter().map(|(lo, hi)| evaluate(lo, hi)).collect();
    let cells = cells?;

    let mut total = [0.0; 2];
    for c in &cells {
        for k in 0..2 {
            total[k] += c.value[k];
        }
    }
    let scale = |t: &[f64; 2]| [t[0].abs().max(f64::MIN_POSITIVE), t[1].abs().max(f64::MIN_POSITIVE)];
    // Keys are gaps relative to the running totals; rekey when those move.
    let rekey = |cells: Vec<Cell>, s: [f64; 2]| -> BinaryHeap<Cell> {
        cells
            .into_iter()
            .map(|mut c| {
                c.error = c.relative_gap(s);
                c
            })
            .collect()
    };
    let mut s = scale(&total);
    let mut heap = rekey(cells, s);
    let mut err: f64 = heap.iter().map(|c| c.error).sum();
    let mut count = heap.len();
    while err > CUBATURE_TOLERANCE && count < MAX_BOXES {
        let Some(worst) = heap.pop() else { break };
        err -= worst.error;
        for k in 0..2 {
            total[k] -= worst.value[k];
        }
        for (lo, hi) in bisect(&worst.lower, &worst.upper) {
            let mut c = evaluate(lo, hi)?;
            for k in 0..2 {
                total[k] += c.value[k];
            }
            c.error = c.relative_gap(s);
            err += c.error;
            heap.push(c);
        }
        count += (1 << n) - 1;
        let fresh = scale(&total);
        if (0..2).any(|k| fresh[k] > 2.0 * s[k] || fresh[k] < 0.5 * s[k]) {
            s = fresh;
            heap = rekey(heap.into_vec(), s);
            err = heap.iter().map(|c| c.error).sum();
        }
    }
    let mut sum = [0.0; 2];
    for c in heap.iter() {
        sum[0] += c.value[0];
        sum[1] += c.value[1];
    }
    Ok(sum)
}

fn bisect(lower: &[f64], upper: &[f64]) -> Vec<(Vec<f64>, Vec<f64>)> {
    let n = lower.len();
    let mid: Vec<f64> = lower.iter().zip(upper).map(|(a, b)| 0.5 * (a + b)).collect();
    (0..(1usize << n))
        .map(|idx| {
            let mut lo = vec![0.0; n];
            let mut hi = vec![0.0; n];
            for d in 0..n {
                if idx >> d & 1 == 0 {
                    lo[d] = lower[d];
                    hi[d] = mid[d];
                } else {
                    lo[d] = mid[d];
                    hi[d] = upper[d];
                }
            }
            (lo, hi)
        })
        .collect()
}

impl Cell {
    fn relative_gap(&self, s: [f64; 2]) -> f64 {
        (self.gap[0] / s[0]).max(self.gap[1] / s[1])
    }
}

/// Both sides of the Caccioppoli inequality on concentric balls.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CaccioppoliReport {
    pub center: Vec<f64>,
    pub rho: f64,
    pub inner: f64,
    pub outer: f64,
    /// ∫_{B(kρ)} |∇u|².
    pub lhs: f64,
    /// ρ⁻²∫_{B(ℓρ)} u² + ∫_{B(ℓρ)} (Lu)².
    pub rhs: f64,
    /// RHS / LHS, infinite when the gradient vanishes.
    pub constant: f64,
}

/// Evaluates C∫_{B(kρ)}|∇u|² ≤ ρ⁻²∫_{B(ℓρ)}u² + ∫_{B(ℓρ)}(Lu)².
pub fn caccioppoli_check(
    op: &EllipticOperator,
    domain: &Domain,
    u: &dyn ScalarField,
    x: &[f64],
    rho: f64,
    k: f64,
    l: f64,
) -> Result<CaccioppoliReport, StabilityError> {
    let n = op.dim();
    if u.dim() != n || x.len() != n {
        return Err(StabilityError::InvalidArgument("dimension mismatch".into()));
    }
    if !(rho > 0.0 && k > 0.0 && k < l) {
        return Err(StabilityError::InvalidArgument("need ρ > 0 and 0 < k < ℓ".into()));
    }
    if domain.signed_distance(x) < l * rho {
        return Err(StabilityError::BallEscapesDomain {
            center: x.to_vec(),
            radius: l * rho,
        });
    }
    let fd = op.finite_difference();
    let inner = ball_quadrature(x, k * rho, 24, 64)?;
    let mut lhs = 0.0;
    for i in 0..inner.len() {
        let g = gradient(u, inner.node(i), &fd)?;
        lhs += inner.weight(i) * g[..n].iter().map(|c| c * c).sum::<f64>();
    }
    let outer = ball_quadrature(x, l * rho, 24, 64)?;
    let mut rhs = 0.0;
    for i in 0..outer.len() {
        let y = outer.node(i);
        let lu = apply(op, u, y)?;
        rhs += outer.weight(i) * (u.value(y).powi(2) / (rho * rho) + lu * lu);
    }
    Ok(CaccioppoliReport {
        center: x.to_vec(),
        rho,
        inner: k,
        outer: l,
        lhs,
        rhs,
        constant: if lhs > 0.0 { rhs / lhs } else { f64::INFINITY },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::OperatorForm;

    fn setup() -> (EllipticOperator, Domain, Bump) {
        (
            EllipticOperator::laplace(2, OperatorForm::Divergence),
            Domain::unit_square(),
            Bump::new(&[0.5, 0.5], 0.2),
        )
    }

    #[test]
    fn ratio_is_scale_invariant() {
        let (op, d, v) = setup();
        let w = CarlemanWeight::standard(2, 1.0);
        let taus = tau_grid(default_tau0(&d), 3);
        let a = carleman_ratio(&op, &d, &v, &Support::of(&v), &w, &taus).unwrap();
        let v2 = v.clone().scaled(2.0);
        let b = carleman_ratio(&op, &d, &v2, &Support::of(&v2), &w, &taus).unwrap();
        for (p, q) in a.points.iter().zip(&b.points) {
            assert!((p.ratio - q.ratio).abs() <= 1e-12 * p.ratio);
        }
    }

    #[test]
    fn exponential_weight_slopes_agree() {
        let (op, d, v) = setup();
        let w = CarlemanWeight::standard(2, 1.0);
        let rep = carleman_ratio(&op, &d, &v, &Support::of(&v), &w, &tau_grid(default_tau0(&d), 5)).unwrap();
        assert!(rep.min_ratio() > 0.0 && rep.max_ratio().is_finite());
        assert!(rep.slope_mismatch() < 0.05, "{} vs {}", rep.lhs_slope, rep.rhs_slope);
    }

    #[test]
    fn quadratic_weight_ratio_positive() {
        let (op, d, v) = setup();
        let rep = carleman_ratio(&op, &d, &v, &Support::of(&v), &CarlemanWeight::quadratic(), &tau_grid(2.0, 4)).unwrap();
        assert!(rep.min_ratio() > 0.0 && rep.max_ratio().is_finite());
    }

    #[test]
    fn rejects_bad_inputs() {
        let (op, d, v) = setup();
        let w = CarlemanWeight::standard(2, 1.0);
        let zero = v.clone().scaled(0.0);
        assert!(matches!(
            carleman_ratio(&op, &d, &zero, &Support::of(&zero), &w, &[1.0]),
            Err(StabilityError::DegenerateField)
        ));
        let edge = Bump::new(&[0.1, 0.5], 0.2);
        assert!(matches!(
            carleman_ratio(&op, &d, &edge, &Support::of(&edge), &w, &[1.0]),
            Err(StabilityError::SupportTouchesBoundary { .. })
        ));
        let centered = Domain::disk([0.0, 0.0], 1.0).unwrap();
        let around = Bump::new(&[0.0, 0.0], 0.3);
        assert!(matches!(
            carleman_ratio(&op, &centered, &around, &Support::of(&around), &w, &[1.0]),
            Err(StabilityError::CriticalPoint { .. })
        ));
    }

    #[test]
    fn caccioppoli_cases() {
        let op = EllipticOperator::laplace(2, OperatorForm::Divergence);
        let d = Domain::unit_square();
        let c = FnField::constant(2, 3.0);
        let rep = caccioppoli_check(&op, &d, &c, &[0.5, 0.5], 0.1, 1.0, 2.0).unwrap();
        assert!(rep.lhs.abs() < 1e-12);
        let lin = FnField::new(2, |x| x[0]);
        let lin2 = FnField::new(2, |x| 2.0 * x[0]);
        let a = caccioppoli_check(&op, &d, &lin, &[0.5, 0.5], 0.1, 1.0, 2.0).unwrap();
        let b = caccioppoli_check(&op, &d, &lin2, &[0.5, 0.5], 0.1, 1.0, 2.0).unwrap();
        assert!((a.constant - b.constant).abs() <= 1e-12 * a.constant);
        assert!(matches!(
            caccioppoli_check(&op, &d, &lin, &[0.5, 0.5], 0.2, 1.0, 3.0),
            Err(StabilityError::BallEscapesDomain { .. })
        ));
    }
}
