use serde::{Deserialize, Serialize};

use super::StabilityError;
use crate::linalg::linear_fit;

/// Candidate stability modulus e ≈ C·m(δ).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Modulus {
    /// |ln δ|^{−β} + δ with fitted β.
    PhiBeta,
    /// |ln δ|^{−1/2} + δ.
    Psi,
    /// δ^p.
    Power,
}

/// |ln s|^{−β} + s.
pub fn log_modulus(s: f64, beta: f64) -> f64 {
    s.ln().abs().powf(-beta) + s
}

/// Least-squares fit in log space of averaged (δ, e) pairs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityFit {
    pub modulus: Modulus,
    /// Distinct noise levels, strictly decreasing.
    pub deltas: Vec<f64>,
    /// Mean error per noise level.
    pub errors: Vec<f64>,
    pub c: f64,
    /// β for the logarithmic moduli, the exponent p for the power law.
    pub beta: f64,
    /// RMS of ln e − ln(C m(δ)).
    pub rms: f64,
    pub power_c: f64,
    pub power_exponent: f64,
    pub power_rms: f64,
}

impl StabilityFit {
    /// The logarithmic modulus has strictly smaller residual than the best
    /// power law.
    pub fn log_beats_power(&self) -> bool {
        self.modulus != Modulus::Power && self.rms < self.power_rms
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("delta,error,model,power_model\n");
        for (d, e) in self.deltas.iter().zip(&self.errors) {
            let model = match self.modulus {
                Modulus::Power => self.c * d.powf(self.beta),
                _ => self.c * log_modulus(*d, self.beta),
            };
            s.push_str(&format!("{d},{e},{model},{}\n", self.power_c * d.powf(self.power_exponent)));
        }
        s
    }
}

const BETA_MIN: f64 = 1e-3;
const BETA_MAX: f64 = 8.0;

/// Fits e ≈ C·m(δ) after averaging errors that share a noise level.
///
/// Needs at least five distinct δ ∈ (0, 1) spanning two decades and positive
/// errors. For Φ_β, ln C is closed form at fixed β and β is found by a scan
/// followed by golden-section refinement.
pub fn stability_fit(pairs: &[(f64, f64)], modulus: Modulus) -> Result<StabilityFit, StabilityError> {
    if pairs.iter().any(|&(d, e)| !(d > 0.0 && d < 1.0) || !(e > 0.0) || !e.is_finite()) {
        return Err(StabilityError::InsufficientData("need δ ∈ (0, 1) and finite e > 0".into()));
    }
    let mut sorted: Vec<(f64, f64)> = pairs.to_vec();
    sorted.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut deltas: Vec<f64> = Vec::new();
    let mut errors: Vec<f64> = Vec::new();
    let mut counts: Vec<usize> = Vec::new();
    for (d, e) in sorted {
        if deltas.last() == Some(&d) {
            *errors.last_mut().expect("nonempty") += e;
            *counts.last_mut().expect("nonempty") += 1;
        } else {
            deltas.push(d);
            errors.push(e);
            counts.push(1);
        }
    }
    for (e, c) in errors.iter_mut().zip(&counts) {
        *e /= *c as f64;
    }
    if deltas.len() < 5 {
        return Err(StabilityError::InsufficientData(format!("{} distinct noise levels, need 5", deltas.len())));
    }
    if deltas[0] / deltas[deltas.len() - 1] < 100.0 * (1.0 - 1e-12) {
        return Err(StabilityError::InsufficientData("noise levels span less than two decades".into()));
    }

    let ld: Vec<f64> = deltas.iter().map(|d| d.ln()).collect();
    let le: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let (p, lc, power_rms) = linear_fit(&ld, &le);
    let power_c = lc.exp();

    let log_fit = |beta: f64| -> (f64, f64) {
        let shifts: Vec<f64> = deltas
            .iter()
            .zip(&le)
            .map(|(d, l)| l - log_modulus(*d, beta).ln())
            .collect();
        let lc = shifts.iter().sum::<f64>() / shifts.len() as f64;
        let rms = (shifts.iter().map(|s| (s - lc).powi(2)).sum::<f64>() / shifts.len() as f64).sqrt();
        (lc, rms)
    };
    let (c, beta, rms) = match modulus {
        Modulus::Power => (power_c, p, power_rms),
        Modulus::Psi => {
            let (lc, rms) = log_fit(0.5);
            (lc.exp(), 0.5, rms)
        }
        Modulus::PhiBeta => {
            let beta = minimize_scalar(|b| log_fit(b).1, BETA_MIN, BETA_MAX);
            let (lc, rms) = log_fit(beta);
            (lc.exp(), beta, rms)
        }
    };
    Ok(StabilityFit {
        modulus,
        deltas,
        errors,
        c,
        beta,
        rms,
        power_c,
        power_exponent: p,
        power_rms,
    })
}

/// Global minimum of f on [a, b]: log-spaced scan, then golden section on the
/// bracket around the best sample.
fn minimize_scalar(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let samples = 400;
    let grid: Vec<f64> = (0..=samples)
        .map(|k| a * (b / a).powf(k as f64 / samples as f64))
        .collect();
    let values: Vec<f64> = grid.iter().map(|&x| f(x)).collect();
    let best = values
        .iter()
        .enumerate()
        .min_by(|x, y| x.1.total_cmp(y.1))
        .map(|(i, _)| i)
        .expect("nonempty grid");
    let mut lo = grid[best.saturating_sub(1)];
    let mut hi = grid[(best + 1).min(samples)];
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..200 {
        if hi - lo <= 1e-12 * hi {
            break;
        }
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = f(x2);
        }
    }
    let mid = 0.5 * (lo + hi);
    if f(mid) <= values[best] {
        mid
    } else {
        grid[best]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn levels() -> Vec<f64> {
        (0..7).map(|k| 10f64.powf(-1.0 - 0.5 * k as f64)).collect()
    }

    #[test]
    fn round_trip_log_modulus() {
        for beta in [0.25, 0.5, 1.0] {
            let pairs: Vec<(f64, f64)> = levels().iter().map(|&d| (d, 2.0 * log_modulus(d, beta))).collect();
            let fit = stability_fit(&pairs, Modulus::PhiBeta).unwrap();
            assert!((fit.beta - beta).abs() <= 0.05, "{beta} -> {}", fit.beta);
            assert!((fit.c - 2.0).abs() <= 0.1);
            assert!(fit.log_beats_power());
        }
    }

    #[test]
    fn power_law_data_favours_power() {
        let pairs: Vec<(f64, f64)> = levels().iter().map(|&d| (d, d)).collect();
        let fit = stability_fit(&pairs, Modulus::PhiBeta).unwrap();
        assert!(!fit.log_beats_power());
        assert!((fit.power_exponent - 1.0).abs() < 1e-12);
    }

    #[test]
    fn repeated_levels_are_averaged() {
        let mut pairs = Vec::new();
        for d in levels() {
            pairs.push((d, 1.0));
            pairs.push((d, 3.0));
        }
        let fit = stability_fit(&pairs, Modulus::Power).unwrap();
        assert_eq!(fit.deltas.len(), 7);
        assert!(fit.errors.iter().all(|e| *e == 2.0));
        assert!(fit.deltas.windows(2).all(|w| w[0] > w[1]));
    }

    #[test]
    fn too_few_levels_or_decades() {
        let few: Vec<(f64, f64)> = levels()[..4].iter().map(|&d| (d, d)).collect();
        assert!(matches!(stability_fit(&few, Modulus::Psi), Err(StabilityError::InsufficientData(_))));
        let narrow: Vec<(f64, f64)> = (0..6).map(|k| (0.1 - 0.01 * k as f64, 1.0)).collect();
        assert!(matches!(stability_fit(&narrow, Modulus::Psi), Err(StabilityError::InsufficientData(_))));
    }
}
