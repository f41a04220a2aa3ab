use gauss_quad::GaussLegendre;
use std::f64::consts::PI;

use super::GeometryError;

/// Weighted point set approximating an integral over a carrier set.
#[derive(Debug, Clone, PartialEq)]
pub struct Quadrature {
    dim: usize,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    exact_degree: Option<usize>,
}

impl Quadrature {
    pub fn new(dim: usize, nodes: Vec<f64>, weights: Vec<f64>) -> Result<Self, GeometryError> {
        if dim == 0 || nodes.len() != dim * weights.len() {
            return Err(GeometryError::InvalidQuadrature("node and weight counts disagree".into()));
        }
        if weights.iter().any(|w| !(*w > 0.0)) {
            return Err(GeometryError::InvalidQuadrature("weights must be positive".into()));
        }
        Ok(Quadrature {
            dim,
            nodes,
            weights,
            exact_degree: None,
        })
    }

    fn with_degree(mut self, degree: usize) -> Self {
        self.exact_degree = Some(degree);
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn node(&self, i: usize) -> &[f64] {
        &self.nodes[i * self.dim..(i + 1) * self.dim]
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Largest total polynomial degree integrated exactly, when known.
    pub fn exact_degree(&self) -> Option<usize> {
        self.exact_degree
    }

    pub fn measure(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn integrate(&self, f: impl Fn(&[f64]) -> f64) -> f64 {
        (0..self.len()).map(|i| self.weights[i] * f(self.node(i))).sum()
    }

    /// Concatenation of rules over disjoint carriers.
    pub fn union(parts: &[Quadrature]) -> Result<Self, GeometryError> {
        let dim = parts.first().map_or(0, |q| q.dim);
        if parts.iter().any(|q| q.dim != dim) {
            return Err(GeometryError::InvalidQuadrature("mixed dimensions".into()));
        }
        let nodes = parts.iter().flat_map(|q| q.nodes.iter().copied()).collect();
        let weights = parts.iter().flat_map(|q| q.weights.iter().copied()).collect();
        Quadrature::new(dim, nodes, weights)
    }
}

/// Gauss–Legendre nodes and weights on [a, b].
pub fn gauss_legendre(order: usize, a: f64, b: f64) -> Result<(Vec<f64>, Vec<f64>), GeometryError> {
    if order == 0 {
        return Err(GeometryError::InvalidQuadrature("order must be at least 1".into()));
    }
    let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
    if order == 1 {
        return Ok((vec![mid], vec![2.0 * half]));
    }
    let rule = GaussLegendre::new(order)
        .map_err(|e| GeometryError::InvalidQuadrature(e.to_string()))?;
    let mut pairs: Vec<(f64, f64)> = rule.as_node_weight_pairs().to_vec();
    pairs.sort_by(|p, q| p.0.total_cmp(&q.0));
    Ok(pairs.iter().map(|(x, w)| (mid + half * x, half * w)).unzip())
}

fn check_center(center: &[f64], r: f64) -> Result<usize, GeometryError> {
    if !(r > 0.0) {
        return Err(GeometryError::NonPositiveRadius);
    }
    match center.len() {
        2 | 3 => Ok(center.len()),
        n => Err(GeometryError::UnsupportedDimension(n)),
    }
}

/// Product rule on the ball B(center, r) in ℝ² or ℝ³.
///
/// Gauss–Legendre in the radius; in 2D a uniform trapezoid rule with
/// `angular_order` points; in 3D Gauss–Legendre in the polar cosine with
/// `angular_order` points times `2·angular_order` uniform azimuths.
pub fn ball_quadrature(
    center: &[f64],
    r: f64,
    radial_order: usize,
    angular_order: usize,
) -> Result<Quadrature, GeometryError> {
    let n = check_center(center, r)?;
    if radial_order == 0 || angular_order == 0 {
        return Err(GeometryError::InvalidQuadrature("orders must be at least 1".into()));
    }
    let (radii, rw) = gauss_legendre(radial_order, 0.0, r)?;
    let sphere = unit_sphere_rule(n, angular_order)?;
    let m = sphere.len();
    let mut nodes = Vec::with_capacity(n * m * radial_order);
    let mut weights = Vec::with_capacity(m * radial_order);
    for (rho, w) in radii.iter().zip(&rw) {
        let jac = rho.powi(n as i32 - 1);
        for k in 0..m {
            let dir = sphere.node(k);
            for d in 0..n {
                nodes.push(center[d] + rho * dir[d]);
            }
            weights.push(w * jac * sphere.weight(k));
        }
    }
    let degree = if n == 2 {
        (2 * radial_order).saturating_sub(2).min(angular_order - 1)
    } else {
        (2 * radial_order).saturating_sub(3).min(2 * angular_order - 1)
    };
    Ok(Quadrature::new(n, nodes, weights)?.with_degree(degree))
}

/// Rule on the sphere S(center, r): trapezoid on circles, Gauss × uniform on S².
pub fn sphere_quadrature(center: &[f64], r: f64, order: usize) -> Result<Quadrature, GeometryError> {
    let n = check_center(center, r)?;
    if order == 0 {
        return Err(GeometryError::InvalidQuadrature("order must be at least 1".into()));
    }
    let unit = unit_sphere_rule(n, order)?;
    let scale = r.powi(n as i32 - 1);
    let mut nodes = Vec::with_capacity(unit.nodes.len());
    for k in 0..unit.len() {
        for d in 0..n {
            nodes.push(center[d] + r * unit.node(k)[d]);
        }
    }
    let weights = unit.weights.iter().map(|w| w * scale).collect();
    let degree = if n == 2 { order - 1 } else { 2 * order - 1 };
    Ok(Quadrature::new(n, nodes, weights)?.with_degree(degree))
}

fn unit_sphere_rule(n: usize, order: usize) -> Result<Quadrature, GeometryError> {
    if n == 2 {
        let w = 2.0 * PI / order as f64;
        let nodes = (0..order)
            .flat_map(|k| {
                let t = 2.0 * PI * k as f64 / order as f64;
                [t.cos(), t.sin()]
            })
            .collect();
        return Quadrature::new(2, nodes, vec![w; order]);
    }
    let (cosines, cw) = gauss_legendre(order, -1.0, 1.0)?;
    let azimuths = 2 * order;
    let aw = 2.0 * PI / azimuths as f64;
    let mut nodes = Vec::with_capacity(3 * order * azimuths);
    let mut weights = Vec::with_capacity(order * azimuths);
    for (c, w) in cosines.iter().zip(&cw) {
        let s = (1.0 - c * c).max(0.0).sqrt();
        for k in 0..azimuths {
            let phi = 2.0 * PI * k as f64 / azimuths as f64;
            nodes.extend_from_slice(&[s * phi.cos(), s * phi.sin(), *c]);
            weights.push(w * aw);
        }
    }
    Quadrature::new(3, nodes, weights)
}

/// Product rule on the planar annulus inner < |x − center| < outer.
pub fn annulus_quadrature(
    center: &[f64],
    inner: f64,
    outer: f64,
    radial_order: usize,
    angular_order: usize,
) -> Result<Quadrature, GeometryError> {
    if !(inner > 0.0 && outer > inner) {
        return Err(GeometryError::InvalidDomain("annulus needs 0 < inner < outer".into()));
    }
    if center.len() != 2 {
        return Err(GeometryError::UnsupportedDimension(center.len()));
    }
    let (radii, rw) = gauss_legendre(radial_order, inner, outer)?;
    let circle = unit_sphere_rule(2, angular_order)?;
    let mut nodes = Vec::new();
    let mut weights = Vec::new();
    for (rho, w) in radii.iter().zip(&rw) {
        for k in 0..circle.len() {
            let d = circle.node(k);
            nodes.extend_from_slice(&[center[0] + rho * d[0], center[1] + rho * d[1]]);
            weights.push(w * rho * circle.weight(k));
        }
    }
    Quadrature::new(2, nodes, weights)
}

/// Composite tensor Gauss rule on an axis-aligned box: `cells` subintervals
/// per axis with `order` points each.
pub fn box_quadrature(
    lower: &[f64],
    upper: &[f64],
    cells: usize,
    order: usize,
) -> Result<Quadrature, GeometryError> {
    let n = lower.len();
    if cells == 0 || n == 0 || n > 3 || upper.len() != n {
        return Err(GeometryError::InvalidQuadrature("bad box rule parameters".into()));
    }
    let axes: Vec<(Vec<f64>, Vec<f64>)> = (0..n)
        .map(|d| {
            let h = (upper[d] - lower[d]) / cells as f64;
            let mut xs = Vec::new();
            let mut ws = Vec::new();
            for c in 0..cells {
                let a = lower[d] + c as f64 * h;
                let (x, w) = gauss_legendre(order, a, a + h)?;
                xs.extend(x);
                ws.extend(w);
            }
            Ok((xs, ws))
        })
        .collect::<Result<_, GeometryError>>()?;
    let mut nodes = Vec::new();
    let mut weights = Vec::new();
    let counts: Vec<usize> = axes.iter().map(|a| a.0.len()).collect();
    let total: usize = counts.iter().product();
    for flat in 0..total {
        let mut rem = flat;
        let mut w = 1.0;
        for d in 0..n {
            let i = rem % counts[d];
            rem /= counts[d];
            nodes.push(axes[d].0[i]);
            w *= axes[d].1[i];
        }
        weights.push(w);
    }
    Ok(Quadrature::new(n, nodes, weights)?.with_degree(2 * order - 1))
}

/// Near-uniform rule on a disk for Nyström discretizations.
///
/// Radii are Gauss–Legendre nodes in [0, radius] with roughly
/// `radius / spacing` points; the ring at radius ρ carries
/// `max(6, round(2πρ / spacing))` equally spaced angles, so neighbouring
/// nodes are about `spacing` apart throughout the disk.
pub fn disk_nystrom_quadrature(
    center: &[f64],
    radius: f64,
    spacing: f64,
) -> Result<Quadrature, GeometryError> {
    if !(radius > 0.0) {
        return Err(GeometryError::NonPositiveRadius);
    }
    if !(spacing > 0.0) || spacing >= radius {
        return Err(GeometryError::InvalidQuadrature("spacing must lie in (0, radius)".into()));
    }
    let rings = (radius / spacing).ceil() as usize;
    let (radii, rw) = gauss_legendre(rings, 0.0, radius)?;
    let mut nodes = Vec::new();
    let mut weights = Vec::new();
    for (k, (rho, w)) in radii.iter().zip(&rw).enumerate() {
        let m = ((2.0 * PI * rho / spacing).round() as usize).max(6);
        let offset = if k % 2 == 0 { 0.0 } else { PI / m as f64 };
        for j in 0..m {
            let t = offset + 2.0 * PI * j as f64 / m as f64;
            nodes.extend_from_slice(&[center[0] + rho * t.cos(), center[1] + rho * t.sin()]);
            weights.push(w * rho * 2.0 * PI / m as f64);
        }
    }
    Quadrature::new(2, nodes, weights)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_disk_area_and_moment() {
        let q = ball_quadrature(&[0.0, 0.0], 1.0, 4, 8).unwrap();
        assert!((q.measure() - PI).abs() < 1e-12);
        assert!((q.integrate(|x| x[0] * x[0]) - PI / 4.0).abs() < 1e-12);
    }

    #[test]
    fn sphere_measures() {
        let c = sphere_quadrature(&[0.0, 0.0], 1.0, 16).unwrap();
        assert!((c.measure() - 2.0 * PI).abs() < 1e-12);
        let s = sphere_quadrature(&[0.0, 0.0, 0.0], 1.0, 6).unwrap();
        assert!((s.measure() - 4.0 * PI).abs() < 1e-12);
        assert!((s.integrate(|x| x[0] * x[0]) - 4.0 * PI / 3.0).abs() < 1e-12);
    }

    #[test]
    fn zero_radius_rejected() {
        assert_eq!(ball_quadrature(&[0.0, 0.0], 0.0, 2, 2).unwrap_err(), GeometryError::NonPositiveRadius);
        assert_eq!(sphere_quadrature(&[0.0, 0.0], 0.0, 2).unwrap_err(), GeometryError::NonPositiveRadius);
        assert!(matches!(ball_quadrature(&[0.0], 1.0, 2, 2), Err(GeometryError::UnsupportedDimension(1))));
    }

    #[test]
    fn box_and_annulus() {
        let q = box_quadrature(&[0.0, 0.0], &[2.0, 1.0], 3, 2).unwrap();
        assert!((q.measure() - 2.0).abs() < 1e-14);
        assert!((q.integrate(|x| x[0] * x[0] * x[1]) - 4.0 / 3.0).abs() < 1e-13);
        let a = annulus_quadrature(&[0.0, 0.0], 1.0, 2.0, 4, 8).unwrap();
        assert!((a.measure() - 3.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn nystrom_disk_rule() {
        let q = disk_nystrom_quadrature(&[0.3, 0.4], 0.2, 0.01).unwrap();
        assert!((q.measure() - PI * 0.04).abs() < 1e-12);
        assert!(q.len() > 1000 && q.len() < 1600);
    }
}
