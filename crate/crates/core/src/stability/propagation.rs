use serde::Serialize;

use super::StabilityError;
use crate::geometry::{ball_quadrature, BallChain, Domain, Quadrature};
use crate::operators::{EllipticOperator, ScalarField};
use crate::small::dist;

/// Norms and fitted exponent at one chain ball.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PropagationStep {
    pub center: Vec<f64>,
    /// ‖u‖ on B(x_k, r), B(x_k, 2r), B(x_k, 3r).
    pub m1: f64,
    pub m2: f64,
    pub m3: f64,
    /// γ̂ with m2 = m1^γ̂ m3^{1−γ̂}.
    pub gamma: f64,
    /// Composed bound for m1 at this ball.
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PropagationReport {
    pub radius: f64,
    pub lu_norm: f64,
    /// max_k m3.
    pub global_norm: f64,
    pub steps: Vec<PropagationStep>,
    pub initial: f64,
    pub measured_end: f64,
    pub bound_end: f64,
}

impl PropagationReport {
    /// Measured norm at every ball is below its composed bound.
    pub fn holds(&self) -> bool {
        self.steps.iter().all(|s| s.m1 <= s.bound * (1.0 + 1e-12) + 1e-300)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("step,m1,m2,m3,gamma,bound\n");
        for (k, p) in self.steps.iter().enumerate() {
            s.push_str(&format!("{k},{},{},{},{},{}\n", p.m1, p.m2, p.m3, p.gamma, p.bound));
        }
        s
    }
}

fn ball_norm(u: &dyn ScalarField, center: &[f64], r: f64) -> Result<f64, StabilityError> {
    let q: Quadrature = ball_quadrature(center, r, 16, 48)?;
    Ok(q.integrate(|x| u.value(x).powi(2)).max(0.0).sqrt())
}

/// Propagates smallness of u along a chain with three-ball steps.
///
/// Step k fits γ̂_k from the measured norms on B(x_k, r), B(x_k, 2r) and
/// B(x_k, 3r), then composes B_{k+1} = M^{1−γ̂_k}(B_k + b)^{γ̂_k} from
/// B₀ = ‖u‖_{B(x₀, r)}, where M bounds every triple-ball norm and b is the
/// supplied ‖Lu‖.
pub fn smallness_propagation(
    op: &EllipticOperator,
    domain: &Domain,
    u: &dyn ScalarField,
    chain: &BallChain,
    lu_norm: f64,
) -> Result<PropagationReport, StabilityError> {
    let n = op.dim();
    if u.dim() != n || domain.dim() != n {
        return Err(StabilityError::InvalidArgument("dimension mismatch".into()));
    }
    if !(lu_norm >= 0.0) {
        return Err(StabilityError::InvalidArgument("‖Lu‖ must be nonnegative".into()));
    }
    let r = chain.radius;
    if chain.is_empty() || !(r > 0.0) {
        return Err(StabilityError::ChainInvalid("empty chain or nonpositive radius".into()));
    }
    for (k, w) in chain.centers.windows(2).enumerate() {
        if dist(&w[0], &w[1]) > r * (1.0 + 1e-12) {
            return Err(StabilityError::ChainInvalid(format!("step {k} longer than the radius")));
        }
    }
    for (k, c) in chain.centers.iter().enumerate() {
        if c.len() != n || domain.signed_distance(c) < 3.0 * r {
            return Err(StabilityError::ChainInvalid(format!("ball {k} of triple radius leaves the domain")));
        }
    }

    let mut norms = Vec::with_capacity(chain.len());
    for c in &chain.centers {
        norms.push([ball_norm(u, c, r)?, ball_norm(u, c, 2.0 * r)?, ball_norm(u, c, 3.0 * r)?]);
    }
    let global = norms.iter().map(|m| m[2]).fold(0.0, f64::max);
    let mut bound = norms[0][0];
    let mut steps = Vec::with_capacity(chain.len());
    for (c, m) in chain.centers.iter().zip(&norms) {
        let gamma = fitted_exponent(m[0], m[1], m[2]);
        steps.push(PropagationStep {
            center: c.clone(),
            m1: m[0],
            m2: m[1],
            m3: m[2],
            gamma,
            bound,
        });
        bound = compose_step(global, bound, lu_norm, gamma);
    }
    let last = steps.last().expect("chain is nonempty");
    Ok(PropagationReport {
        radius: r,
        lu_norm,
        global_norm: global,
        initial: norms[0][0],
        measured_end: last.m1,
        bound_end: last.bound,
        steps,
    })
}

/// ln(m3/m2)/ln(m3/m1), or 1 when the norms do not separate.
fn fitted_exponent(m1: f64, m2: f64, m3: f64) -> f64 {
    if !(m1 > 0.0) || m3 <= m1 {
        return 1.0;
    }
    ((m3 / m2).ln() / (m3 / m1).ln()).clamp(0.0, 1.0)
}

fn compose_step(global: f64, bound: f64, b: f64, gamma: f64) -> f64 {
    if gamma >= 1.0 {
        return bound + b;
    }
    global.powf(1.0 - gamma) * (bound + b).powf(gamma)
}

/// C = (2c)^{1/(1−γ)}.
pub fn recursion_constant(c: f64, gamma: f64) -> f64 {
    (2.0 * c).powf(1.0 / (1.0 - gamma))
}

/// C(η₀ + b)^{γ^k}, the closed-form bound for η_{j+1} ≤ c(η_j + b)^γ,
/// valid when 2c ≥ 1 and η₀ + b ≤ 1.
pub fn recursion_bound(eta0: f64, b: f64, c: f64, gamma: f64, k: u32) -> f64 {
    recursion_constant(c, gamma) * (eta0 + b).powf(gamma.powi(k as i32))
}

/// η₀, …, η_k with η_{j+1} = c(η_j + b)^γ.
pub fn iterate_recursion(eta0: f64, b: f64, c: f64, gamma: f64, k: u32) -> Vec<f64> {
    let mut out = vec![eta0];
    for _ in 0..k {
        let last = *out.last().expect("nonempty");
        out.push(c * (last + b).powf(gamma));
    }
    out
}
