use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use super::GeometryError;
use crate::small::{ball_volume, dist};

/// Bounded open set in ℝⁿ, n ∈ {1, 2, 3}.
///
/// A `Rectangle` with one coordinate is an interval; with three it is a box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Domain {
    Rectangle { lower: Vec<f64>, upper: Vec<f64> },
    Disk { center: [f64; 2], radius: f64 },
    Ball { center: [f64; 3], radius: f64 },
    Annulus { center: [f64; 2], inner: f64, outer: f64 },
    Polygon { vertices: Vec<[f64; 2]> },
}

impl Domain {
    pub fn rectangle(lower: &[f64], upper: &[f64]) -> Result<Self, GeometryError> {
        let d = Domain::Rectangle {
            lower: lower.to_vec(),
            upper: upper.to_vec(),
        };
        d.validate()?;
        Ok(d)
    }

    pub fn interval(a: f64, b: f64) -> Result<Self, GeometryError> {
        Self::rectangle(&[a], &[b])
    }

    pub fn unit_square() -> Self {
        Domain::Rectangle {
            lower: vec![0.0, 0.0],
            upper: vec![1.0, 1.0],
        }
    }

    pub fn disk(center: [f64; 2], radius: f64) -> Result<Self, GeometryError> {
        let d = Domain::Disk { center, radius };
        d.validate()?;
        Ok(d)
    }

    pub fn ball(center: [f64; 3], radius: f64) -> Result<Self, GeometryError> {
        let d = Domain::Ball { center, radius };
        d.validate()?;
        Ok(d)
    }

    pub fn annulus(center: [f64; 2], inner: f64, outer: f64) -> Result<Self, GeometryError> {
        let d = Domain::Annulus {
            center,
            inner,
            outer,
        };
        d.validate()?;
        Ok(d)
    }

    pub fn polygon(vertices: Vec<[f64; 2]>) -> Result<Self, GeometryError> {
        let d = Domain::Polygon { vertices };
        d.validate()?;
        Ok(d)
    }

    /// L-shaped hexagon: the square (0, 2s)² minus its upper-right quarter.
    pub fn l_shape(side: f64) -> Result<Self, GeometryError> {
        let s = side;
        Self::polygon(vec![
            [0.0, 0.0],
            [2.0 * s, 0.0],
            [2.0 * s, s],
            [s, s],
            [s, 2.0 * s],
            [0.0, 2.0 * s],
        ])
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        let bad = |m: &str| Err(GeometryError::InvalidDomain(m.to_string()));
        match self {
            Domain::Rectangle { lower, upper } => {
                if lower.is_empty() || lower.len() > 3 || lower.len() != upper.len() {
                    return bad("rectangle corners must share a dimension in 1..=3");
                }
                if lower.iter().zip(upper).any(|(a, b)| !(b > a)) {
                    return bad("rectangle upper corner must exceed lower corner");
                }
            }
            Domain::Disk { radius, .. } | Domain::Ball { radius, .. } => {
                if !(*radius > 0.0) {
                    return Err(GeometryError::NonPositiveRadius);
                }
            }
            Domain::Annulus { inner, outer, .. } => {
                if !(*inner > 0.0 && outer > inner) {
                    return bad("annulus needs 0 < inner < outer");
                }
            }
            Domain::Polygon { vertices } => {
                if vertices.len() < 3 {
                    return bad("polygon needs at least three vertices");
                }
                if signed_area(vertices) <= 0.0 {
                    return bad("polygon must be counterclockwise with positive area");
                }
                if self_intersects(vertices) {
                    return bad("polygon is not simple");
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        match self {
            Domain::Rectangle { lower, .. } => lower.len(),
            Domain::Ball { .. } => 3,
            _ => 2,
        }
    }

    pub fn measure(&self) -> f64 {
        match self {
            Domain::Rectangle { lower, upper } => {
                lower.iter().zip(upper).map(|(a, b)| b - a).product()
            }
            Domain::Disk { radius, .. } => PI * radius * radius,
            Domain::Ball { radius, .. } => ball_volume(3, *radius),
            Domain::Annulus { inner, outer, .. } => PI * (outer * outer - inner * inner),
            Domain::Polygon { vertices } => signed_area(vertices),
        }
    }

    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        match self {
            Domain::Rectangle { lower, upper } => (lower.clone(), upper.clone()),
            Domain::Disk { center, radius } => (
                vec![center[0] - radius, center[1] - radius],
                vec![center[0] + radius, center[1] + radius],
            ),
            Domain::Ball { center, radius } => (
                center.iter().map(|c| c - radius).collect(),
                center.iter().map(|c| c + radius).collect(),
            ),
            Domain::Annulus { center, outer, .. } => (
                vec![center[0] - outer, center[1] - outer],
                vec![center[0] + outer, center[1] + outer],
            ),
            Domain::Polygon { vertices } => {
                let mut lo = vec![f64::INFINITY; 2];
                let mut hi = vec![f64::NEG_INFINITY; 2];
                for v in vertices {
                    for k in 0..2 {
                        lo[k] = lo[k].min(v[k]);
                        hi[k] = hi[k].max(v[k]);
                    }
                }
                (lo, hi)
            }
        }
    }

    pub fn diameter(&self) -> f64 {
        match self {
            Domain::Rectangle { lower, upper } => dist(lower, upper),
            Domain::Disk { radius, .. } | Domain::Ball { radius, .. } => 2.0 * radius,
            Domain::Annulus { outer, .. } => 2.0 * outer,
            Domain::Polygon { vertices } => {
                let mut d: f64 = 0.0;
                for a in vertices {
                    for b in vertices {
                        d = d.max(dist(a, b));
                    }
                }
                d
            }
        }
    }

    /// Signed distance to the boundary: positive inside, negative outside.
    pub fn signed_distance(&self, x: &[f64]) -> f64 {
        match self {
            Domain::Rectangle { lower, upper } => {
                let mut inside = f64::INFINITY;
                let mut outside = 0.0;
                for k in 0..lower.len() {
                    let lo = x[k] - lower[k];
                    let hi = upper[k] - x[k];
                    inside = inside.min(lo.min(hi));
                    let excess = (-lo).max(-hi).max(0.0);
                    outside += excess * excess;
                }
                if inside >= 0.0 {
                    inside
                } else {
                    -outside.sqrt()
                }
            }
            Domain::Disk { center, radius } => radius - dist(x, center),
            Domain::Ball { center, radius } => radius - dist(x, center),
            Domain::Annulus {
                center,
                inner,
                outer,
            } => {
                let r = dist(x, center);
                (outer - r).min(r - inner)
            }
            Domain::Polygon { vertices } => {
                let p = [x[0], x[1]];
                let d = polygon_edge_distance(vertices, &p);
                if point_in_polygon(vertices, &p) {
                    d
                } else {
                    -d
                }
            }
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.signed_distance(x) > 0.0
    }

    pub fn boundary_distance(&self, x: &[f64]) -> f64 {
        self.signed_distance(x).abs()
    }

    /// Nearest boundary point.
    pub fn project_to_boundary(&self, x: &[f64]) -> Vec<f64> {
        match self {
            Domain::Rectangle { lower, upper } => {
                let mut p: Vec<f64> = x
                    .iter()
                    .zip(lower.iter().zip(upper))
                    .map(|(v, (a, b))| v.clamp(*a, *b))
                    .collect();
                if self.signed_distance(x) > 0.0 {
                    let mut best = (f64::INFINITY, 0, 0.0);
                    for k in 0..lower.len() {
                        for side in [lower[k], upper[k]] {
                            let d = (x[k] - side).abs();
                            if d < best.0 {
                                best = (d, k, side);
                            }
                        }
                    }
                    p[best.1] = best.2;
                }
                p
            }
            Domain::Disk { center, radius } => radial_projection(x, center, *radius),
            Domain::Ball { center, radius } => radial_projection(x, center, *radius),
            Domain::Annulus {
                center,
                inner,
                outer,
            } => {
                let r = dist(x, center);
                if (outer - r).abs() <= (r - inner).abs() {
                    radial_projection(x, center, *outer)
                } else {
                    radial_projection(x, center, *inner)
                }
            }
            Domain::Polygon { vertices } => {
                let p = [x[0], x[1]];
                let mut best = (f64::INFINITY, p);
                for i in 0..vertices.len() {
                    let (a, b) = (vertices[i], vertices[(i + 1) % vertices.len()]);
                    let q = closest_on_segment(&a, &b, &p);
                    let d = dist(&q, &p);
                    if d < best.0 {
                        best = (d, q);
                    }
                }
                best.1.to_vec()
            }
        }
    }

    /// Distance from an interior point `x` along the unit direction `dir`
    /// to the first boundary crossing.
    pub fn ray_exit(&self, x: &[f64], dir: &[f64]) -> f64 {
        match self {
            Domain::Rectangle { lower, upper } => {
                let mut t = f64::INFINITY;
                for k in 0..lower.len() {
                    if dir[k] > 0.0 {
                        t = t.min((upper[k] - x[k]) / dir[k]);
                    } else if dir[k] < 0.0 {
                        t = t.min((lower[k] - x[k]) / dir[k]);
                    }
                }
                t.max(0.0)
            }
            Domain::Disk { center, radius } => sphere_exit(x, dir, center, *radius),
            Domain::Ball { center, radius } => sphere_exit(x, dir, center, *radius),
            Domain::Annulus {
                center,
                inner,
                outer,
            } => {
                let out = sphere_exit(x, dir, center, *outer);
                match sphere_entry(x, dir, center, *inner) {
                    Some(t) if t < out => t,
                    _ => out,
                }
            }
            Domain::Polygon { vertices } => {
                let mut t = f64::INFINITY;
                for i in 0..vertices.len() {
                    let (a, b) = (vertices[i], vertices[(i + 1) % vertices.len()]);
                    if let Some(s) = ray_segment(x, dir, &a, &b) {
                        t = t.min(s);
                    }
                }
                t
            }
        }
    }
}

fn radial_projection(x: &[f64], center: &[f64], radius: f64) -> Vec<f64> {
    let r = dist(x, center);
    if r == 0.0 {
        let mut p = center.to_vec();
        p[0] += radius;
        return p;
    }
    x.iter()
        .zip(center)
        .map(|(v, c)| c + radius * (v - c) / r)
        .collect()
}

fn sphere_exit(x: &[f64], dir: &[f64], center: &[f64], radius: f64) -> f64 {
    let mut b = 0.0;
    let mut c = -radius * radius;
    for k in 0..center.len() {
        let d = x[k] - center[k];
        b += d * dir[k];
        c += d * d;
    }
    let disc = (b * b - c).max(0.0);
    (-b + disc.sqrt()).max(0.0)
}

fn sphere_entry(x: &[f64], dir: &[f64], center: &[f64], radius: f64) -> Option<f64> {
    let mut b = 0.0;
    let mut c = -radius * radius;
    for k in 0..center.len() {
        let d = x[k] - center[k];
        b += d * dir[k];
        c += d * d;
    }
    let disc = b * b - c;
    if disc < 0.0 {
        return None;
    }
    let t = -b - disc.sqrt();
    (t >= 0.0).then_some(t)
}

fn ray_segment(x: &[f64], dir: &[f64], a: &[f64; 2], b: &[f64; 2]) -> Option<f64> {
    let e = [b[0] - a[0], b[1] - a[1]];
    let denom = dir[0] * e[1] - dir[1] * e[0];
    if denom.abs() < 1e-300 {
        return None;
    }
    let w = [a[0] - x[0], a[1] - x[1]];
    let t = (w[0] * e[1] - w[1] * e[0]) / denom;
    let s = (w[0] * dir[1] - w[1] * dir[0]) / denom;
    (t >= 0.0 && (-1e-14..=1.0 + 1e-14).contains(&s)).then_some(t)
}

pub(crate) fn signed_area(v: &[[f64; 2]]) -> f64 {
    let n = v.len();
    0.5 * (0..n)
        .map(|i| {
            let (a, b) = (v[i], v[(i + 1) % n]);
            a[0] * b[1] - b[0] * a[1]
        })
        .sum::<f64>()
}

fn orient(a: &[f64; 2], b: &[f64; 2], c: &[f64; 2]) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

fn self_intersects(v: &[[f64; 2]]) -> bool {
    let n = v.len();
    for i in 0..n {
        let (a, b) = (v[i], v[(i + 1) % n]);
        for j in i + 1..n {
            if j == i + 1 || (i == 0 && j == n - 1) {
                continue;
            }
            let (c, d) = (v[j], v[(j + 1) % n]);
            let (o1, o2) = (orient(&a, &b, &c), orient(&a, &b, &d));
            let (o3, o4) = (orient(&c, &d, &a), orient(&c, &d, &b));
            if o1 * o2 < 0.0 && o3 * o4 < 0.0 {
                return true;
            }
        }
    }
    false
}

pub(crate) fn point_in_polygon(v: &[[f64; 2]], p: &[f64; 2]) -> bool {
    let n = v.len();
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (v[i], v[j]);
        if (a[1] > p[1]) != (b[1] > p[1]) {
            let x = a[0] + (p[1] - a[1]) * (b[0] - a[0]) / (b[1] - a[1]);
            if p[0] < x {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

fn closest_on_segment(a: &[f64; 2], b: &[f64; 2], p: &[f64; 2]) -> [f64; 2] {
    let e = [b[0] - a[0], b[1] - a[1]];
    let len2 = e[0] * e[0] + e[1] * e[1];
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((p[0] - a[0]) * e[0] + (p[1] - a[1]) * e[1]) / len2).clamp(0.0, 1.0)
    };
    [a[0] + t * e[0], a[1] + t * e[1]]
}

fn polygon_edge_distance(v: &[[f64; 2]], p: &[f64; 2]) -> f64 {
    (0..v.len())
        .map(|i| dist(&closest_on_segment(&v[i], &v[(i + 1) % v.len()], p), p))
        .fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn measures() {
        assert_eq!(Domain::unit_square().measure(), 1.0);
        let l = Domain::l_shape(1.0).unwrap();
        assert!((l.measure() - 3.0).abs() < 1e-15);
        let a = Domain::annulus([0.0, 0.0], 1.0, 2.0).unwrap();
        assert!((a.measure() - 3.0 * PI).abs() < 1e-14);
    }

    #[test]
    fn invalid_shapes_rejected() {
        assert!(Domain::annulus([0.0, 0.0], 2.0, 1.0).is_err());
        assert!(Domain::disk([0.0, 0.0], 0.0).is_err());
        let clockwise = vec![[0.0, 0.0], [0.0, 1.0], [1.0, 0.0]];
        assert!(Domain::polygon(clockwise).is_err());
        let bowtie = vec![[0.0, 0.0], [1.0, 1.0], [1.0, 0.0], [0.0, 1.0]];
        assert!(Domain::polygon(bowtie).is_err());
    }

    #[test]
    fn distances_and_rays() {
        let sq = Domain::unit_square();
        assert!((sq.signed_distance(&[0.2, 0.7]) - 0.2).abs() < 1e-15);
        assert!(sq.signed_distance(&[1.5, 0.5]) < 0.0);
        assert!((sq.ray_exit(&[0.5, 0.5], &[1.0, 0.0]) - 0.5).abs() < 1e-15);
        let disk = Domain::disk([0.0, 0.0], 1.0).unwrap();
        assert!((disk.ray_exit(&[0.5, 0.0], &[-1.0, 0.0]) - 1.5).abs() < 1e-15);
        let l = Domain::l_shape(1.0).unwrap();
        assert!(l.contains(&[0.5, 1.5]));
        assert!(!l.contains(&[1.5, 1.5]));
        assert!((l.ray_exit(&[0.5, 0.5], &[1.0, 0.0]) - 1.5).abs() < 1e-14);
        let p = l.project_to_boundary(&[0.9, 1.5]);
        assert!((p[0] - 1.0).abs() < 1e-15 && (p[1] - 1.5).abs() < 1e-15);
    }
}
