//! Fixed-size vector helpers for points in dimension one to three.
//!
//! Points travel as `&[f64]` slices; derived quantities use zero-padded
//! `[f64; 3]` arrays so that no allocation happens in inner loops.

pub const MAX_DIM: usize = 3;

pub type Vec3 = [f64; 3];
pub type Mat3 = [[f64; 3]; 3];

pub const ZERO3: Vec3 = [0.0; 3];
pub const ZERO33: Mat3 = [[0.0; 3]; 3];

pub fn pad(x: &[f64]) -> Vec3 {
    let mut out = ZERO3;
    out[..x.len()].copy_from_slice(x);
    out
}

pub fn identity(n: usize) -> Mat3 {
    let mut m = ZERO33;
    for (i, row) in m.iter_mut().enumerate().take(n) {
        row[i] = 1.0;
    }
    m
}

pub fn diagonal(d: &[f64]) -> Mat3 {
    let mut m = ZERO33;
    for (i, v) in d.iter().enumerate() {
        m[i][i] = *v;
    }
    m
}

pub fn scale_mat(m: &Mat3, s: f64) -> Mat3 {
    let mut out = *m;
    out.iter_mut().flatten().for_each(|v| *v *= s);
    out
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec3 {
    let mut out = ZERO3;
    for i in 0..a.len() {
        out[i] = a[i] - b[i];
    }
    out
}

pub fn mat_vec(m: &Mat3, v: &Vec3, n: usize) -> Vec3 {
    let mut out = ZERO3;
    for i in 0..n {
        out[i] = (0..n).map(|j| m[i][j] * v[j]).sum();
    }
    out
}

pub fn trace_product(a: &Mat3, b: &Mat3, n: usize) -> f64 {
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            s += a[i][j] * b[i][j];
        }
    }
    s
}

pub fn frobenius(a: &Mat3, n: usize) -> f64 {
    trace_product(a, a, n).sqrt()
}

pub fn determinant(a: &Mat3, n: usize) -> f64 {
    match n {
        1 => a[0][0],
        2 => a[0][0] * a[1][1] - a[0][1] * a[1][0],
        _ => {
            a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1])
                - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
                + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
        }
    }
}

/// Inverse of the leading `n`×`n` block; `None` when the determinant vanishes.
pub fn inverse(a: &Mat3, n: usize) -> Option<Mat3> {
    let det = determinant(a, n);
    let scale = frobenius(a, n).powi(n as i32);
    if det == 0.0 || !det.is_finite() || det.abs() <= 1e-14 * scale {
        return None;
    }
    let mut inv = ZERO33;
    match n {
        1 => inv[0][0] = 1.0 / det,
        2 => {
            inv[0][0] = a[1][1] / det;
            inv[0][1] = -a[0][1] / det;
            inv[1][0] = -a[1][0] / det;
            inv[1][1] = a[0][0] / det;
        }
        _ => {
            for i in 0..3 {
                for j in 0..3 {
                    let (r0, r1) = ((j + 1) % 3, (j + 2) % 3);
                    let (c0, c1) = ((i + 1) % 3, (i + 2) % 3);
                    inv[i][j] = (a[r0][c0] * a[r1][c1] - a[r0][c1] * a[r1][c0]) / det;
                }
            }
        }
    }
    Some(inv)
}

/// Eigenvalues of the symmetric leading block, ascending.
pub fn symmetric_eigenvalues(a: &Mat3, n: usize) -> Vec<f64> {
    match n {
        1 => vec![a[0][0]],
        2 => {
            let mean = 0.5 * (a[0][0] + a[1][1]);
            let half = 0.5 * (a[0][0] - a[1][1]);
            let r = (half * half + a[0][1] * a[1][0]).max(0.0).sqrt();
            vec![mean - r, mean + r]
        }
        _ => {
            let m = nalgebra::Matrix3::from_fn(|i, j| a[i][j]);
            let mut ev: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
            ev.sort_by(|x, y| x.total_cmp(y));
            ev
        }
    }
}

/// Surface measure of the unit sphere in ℝⁿ.
pub fn unit_sphere_area(n: usize) -> f64 {
    match n {
        1 => 2.0,
        2 => 2.0 * std::f64::consts::PI,
        3 => 4.0 * std::f64::consts::PI,
        _ => {
            let half = n as f64 / 2.0;
            2.0 * std::f64::consts::PI.powf(half) / gamma_half_integer(half)
        }
    }
}

/// Volume of the ball of radius `r` in ℝⁿ.
pub fn ball_volume(n: usize, r: f64) -> f64 {
    unit_sphere_area(n) * r.powi(n as i32) / n as f64
}

fn gamma_half_integer(x: f64) -> f64 {
    // Γ on positive integers and half integers.
    if (x - x.round()).abs() < 1e-12 {
        (1..x.round() as u64).map(|k| k as f64).product()
    } else {
        let mut g = std::f64::consts::PI.sqrt();
        let mut t = 0.5;
        while t < x - 1e-12 {
            g *= t;
            t += 1.0;
        }
        g
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_round_trips() {
        let a = [[2.0, 0.3, 0.1], [0.3, 1.5, -0.2], [0.1, -0.2, 1.0]];
        let inv = inverse(&a, 3).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let s: f64 = (0..3).map(|k| a[i][k] * inv[k][j]).sum();
                assert!((s - if i == j { 1.0 } else { 0.0 }).abs() < 1e-14);
            }
        }
        assert!(inverse(&ZERO33, 2).is_none());
    }

    #[test]
    fn sphere_areas() {
        assert!((unit_sphere_area(4) - 2.0 * std::f64::consts::PI.powi(2)).abs() < 1e-12);
        assert!((ball_volume(3, 2.0) - 32.0 * std::f64::consts::PI / 3.0).abs() < 1e-12);
    }

    #[test]
    fn eigenvalues_two_by_two() {
        let ev = symmetric_eigenvalues(&diagonal(&[2.0, 0.5]), 2);
        assert_eq!(ev, vec![0.5, 2.0]);
    }
}
