use serde::{Deserialize, Serialize};

use super::{Domain, GeometryError};
use crate::small::dist;

/// Overlapping balls of a common radius leading from a subdomain to a target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BallChain {
    pub centers: Vec<Vec<f64>>,
    pub radius: f64,
    pub margin: f64,
}

impl BallChain {
    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    /// Checks the four containment properties of a chain.
    pub fn validate(
        &self,
        domain: &Domain,
        omega_center: &[f64],
        omega_radius: f64,
        target: &[f64],
    ) -> Result<(), GeometryError> {
        let r = self.radius;
        let fail = |m: String| Err(GeometryError::InvalidChain(m));
        let (Some(first), Some(last)) = (self.centers.first(), self.centers.last()) else {
            return fail("empty chain".into());
        };
        if dist(first, omega_center) + r > omega_radius + 1e-12 * omega_radius {
            return fail("first ball leaves the subdomain".into());
        }
        if dist(last, target) >= r {
            return fail("target outside the last ball".into());
        }
        for (k, w) in self.centers.windows(2).enumerate() {
            if dist(&w[0], &w[1]) > r * (1.0 + 1e-12) {
                return fail(format!("step {k} longer than the radius"));
            }
        }
        for (k, c) in self.centers.iter().enumerate() {
            if domain.signed_distance(c) < 3.0 * r + self.margin {
                return fail(format!("ball {k} of triple radius leaves the domain"));
            }
        }
        Ok(())
    }
}

/// Chain along the straight segment from the subdomain center to the target.
pub fn ball_chain(
    domain: &Domain,
    omega_center: &[f64],
    omega_radius: f64,
    target: &[f64],
    r: f64,
) -> Result<BallChain, GeometryError> {
    let path = vec![omega_center.to_vec(), target.to_vec()];
    ball_chain_along(domain, omega_radius, &path, r, None)
}

/// Chain along a polyline starting at the subdomain center and ending at the target.
///
/// Each new center is the first path point at distance `r` from the previous
/// one; construction stops once the target lies inside the current ball.
/// `margin` defaults to 10⁻³ times the domain diameter.
pub fn ball_chain_along(
    domain: &Domain,
    omega_radius: f64,
    path: &[Vec<f64>],
    r: f64,
    margin: Option<f64>,
) -> Result<BallChain, GeometryError> {
    if !(r > 0.0) {
        return Err(GeometryError::NonPositiveRadius);
    }
    if path.len() < 2 || path.iter().any(|p| p.len() != domain.dim()) {
        return Err(GeometryError::TargetUnreachable("path needs two points in the domain dimension".into()));
    }
    let margin = margin.unwrap_or(1e-3 * domain.diameter());
    let target = path.last().unwrap();
    if !domain.contains(target) {
        return Err(GeometryError::TargetUnreachable("target lies outside the domain".into()));
    }
    let clearance = path_clearance(domain, path, r);
    if clearance < 3.0 * r + margin {
        return Err(GeometryError::PathTooCloseToBoundary {
            clearance,
            required: 3.0 * r + margin,
        });
    }
    if r > omega_radius {
        return Err(GeometryError::InitialBallOutsideSubdomain { r, omega_radius });
    }
    let mut centers = vec![path[0].clone()];
    let (mut seg, mut t0) = (0usize, 0.0f64);
    let budget = 1_000_000;
    while dist(centers.last().unwrap(), target) >= r {
        if centers.len() > budget {
            return Err(GeometryError::TargetUnreachable("step budget exhausted".into()));
        }
        let x = centers.last().unwrap().clone();
        let mut next = None;
        while seg + 1 < path.len() {
            if let Some(t) = exit_parameter(&path[seg], &path[seg + 1], &x, r, t0) {
                next = Some(t);
                break;
            }
            seg += 1;
            t0 = 0.0;
        }
        let Some(t) = next else {
            return Err(GeometryError::TargetUnreachable("path ended before reaching the target".into()));
        };
        let (a, b) = (&path[seg], &path[seg + 1]);
        centers.push(a.iter().zip(b).map(|(p, q)| p + t * (q - p)).collect());
        t0 = t;
    }
    Ok(BallChain {
        centers,
        radius: r,
        margin,
    })
}

/// Largest t ∈ [t0, 1] with |a + t(b − a) − x| = r, when the segment leaves the ball.
fn exit_parameter(a: &[f64], b: &[f64], x: &[f64], r: f64, t0: f64) -> Option<f64> {
    let (mut qa, mut qb, mut qc) = (0.0, 0.0, -r * r);
    for k in 0..a.len() {
        let e = b[k] - a[k];
        let w = a[k] - x[k];
        qa += e * e;
        qb += 2.0 * e * w;
        qc += w * w;
    }
    if qa == 0.0 {
        return None;
    }
    let disc = qb * qb - 4.0 * qa * qc;
    if disc < 0.0 {
        return None;
    }
    let t = (-qb + disc.sqrt()) / (2.0 * qa);
    (t > t0 && t <= 1.0 + 1e-9).then_some(t.min(1.0))
}

fn path_clearance(domain: &Domain, path: &[Vec<f64>], r: f64) -> f64 {
    let mut best = f64::INFINITY;
    for w in path.windows(2) {
        let len = dist(&w[0], &w[1]);
        let steps = ((len / (0.05 * r)).ceil() as usize).clamp(1, 100_000);
        for s in 0..=steps {
            let t = s as f64 / steps as f64;
            let p: Vec<f64> = w[0].iter().zip(&w[1]).map(|(a, b)| a + t * (b - a)).collect();
            best = best.min(domain.signed_distance(&p));
        }
    }
    best
}
