use nalgebra::Complex;
use serde::Serialize;
use std::f64::consts::PI;

use super::HarmonicError;
use crate::geometry::Domain;
use crate::operators::ScalarField;

/// Harmonic extension into a disk of equispaced boundary samples.
///
/// The samples define a trigonometric interpolant Σ cₖ e^{ikθ}; its harmonic
/// extension Σ cₖ (ρ/R)^{|k|} e^{ikθ} is evaluated by Horner's rule in
/// w = (x − center)/R. At the center this is the sample mean, i.e. the
/// trapezoid rule for the circle average.
#[derive(Debug, Clone, PartialEq)]
pub struct DiskHarmonicExtension {
    center: [f64; 2],
    radius: f64,
    /// Coefficients Cₖ with u = Re Σ Cₖ wᵏ.
    coeffs: Vec<Complex<f64>>,
}

impl DiskHarmonicExtension {
    /// `samples[j]` is the datum at angle 2πj/M.
    pub fn from_samples(center: [f64; 2], radius: f64, samples: &[f64]) -> Result<Self, HarmonicError> {
        let m = samples.len();
        if m < 2 || !(radius > 0.0) {
            return Err(HarmonicError::InvalidArgument("need two samples and a positive radius".into()));
        }
        let half = m / 2;
        let mut coeffs = Vec::with_capacity(half + 1);
        for k in 0..=half {
            let mut s = Complex::new(0.0, 0.0);
            for (j, g) in samples.iter().enumerate() {
                let t = 2.0 * PI * (k * j) as f64 / m as f64;
                s += Complex::new(t.cos(), -t.sin()) * *g;
            }
            let nyquist = m.is_multiple_of(2) && k == half;
            let scale = if k == 0 || nyquist { 1.0 } else { 2.0 };
            let mut c = s * (scale / m as f64);
            if nyquist {
                // Keep only the real cos(Mθ/2) part, which is what the samples see.
                c = Complex::new(c.re, 0.0);
            }
            coeffs.push(c);
        }
        Ok(DiskHarmonicExtension { center, radius, coeffs })
    }

    pub fn new(center: [f64; 2], radius: f64, g: impl Fn(&[f64]) -> f64, samples: usize) -> Result<Self, HarmonicError> {
        let data: Vec<f64> = (0..samples)
            .map(|j| {
                let t = 2.0 * PI * j as f64 / samples as f64;
                g(&[center[0] + radius * t.cos(), center[1] + radius * t.sin()])
            })
            .collect();
        DiskHarmonicExtension::from_samples(center, radius, &data)
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64, HarmonicError> {
        let w = Complex::new((x[0] - self.center[0]) / self.radius, (x[1] - self.center[1]) / self.radius);
        if w.norm() >= 1.0 - 1e-12 {
            return Err(HarmonicError::PointOnBoundary);
        }
        let mut acc = Complex::new(0.0, 0.0);
        for c in self.coeffs.iter().rev() {
            acc = acc * w + c;
        }
        Ok(acc.re)
    }
}

/// Default number of boundary samples for [`poisson_disk`].
pub const POISSON_SAMPLES: usize = 256;

/// Poisson integral of `g` over the circle ∂B(center, radius), evaluated at x.
pub fn poisson_disk(g: impl Fn(&[f64]) -> f64, center: [f64; 2], radius: f64, x: &[f64]) -> Result<f64, HarmonicError> {
    DiskHarmonicExtension::new(center, radius, g, POISSON_SAMPLES)?.eval(x)
}

/// Node layout for Perron iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PerronGrid {
    /// Disks: center node plus `rings` circles of `angles` nodes, the last on ∂Ω.
    Polar { rings: usize, angles: usize },
    /// Polygons: lattice of the bounding box with roughly this spacing.
    Cartesian { spacing: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRecord {
    pub sweep: usize,
    /// Largest |change| of a node value during the sweep.
    pub max_update: f64,
    /// Largest decrease of a node value; zero for a monotone sweep.
    pub max_dip: f64,
}

/// Piecewise-bilinear field on a Perron grid.
#[derive(Debug, Clone)]
pub struct PerronField {
    layout: Layout,
    values: Vec<f64>,
    fixed: Vec<bool>,
}

#[derive(Debug, Clone)]
enum Layout {
    Polar {
        center: [f64; 2],
        radius: f64,
        rings: usize,
        angles: usize,
    },
    Cartesian {
        lower: [f64; 2],
        step: [f64; 2],
        counts: [usize; 2],
    },
}

impl PerronField {
    pub fn num_nodes(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn node(&self, k: usize) -> [f64; 2] {
        match &self.layout {
            Layout::Polar {
                center,
                radius,
                rings,
                angles,
            } => {
                if k == 0 {
                    return *center;
                }
                let (i, j) = ((k - 1) / angles + 1, (k - 1) % angles);
                let rho = radius * i as f64 / *rings as f64;
                let t = 2.0 * PI * j as f64 / *angles as f64;
                [center[0] + rho * t.cos(), center[1] + rho * t.sin()]
            }
            Layout::Cartesian { lower, step, counts } => {
                let (i, j) = (k % (counts[0] + 1), k / (counts[0] + 1));
                [lower[0] + step[0] * i as f64, lower[1] + step[1] * j as f64]
            }
        }
    }

    /// Bilinear interpolation weights: four (node, weight) pairs summing to one.
    fn weights(&self, x: &[f64]) -> [(usize, f64); 4] {
        match &self.layout {
            Layout::Polar {
                center,
                radius,
                rings,
                angles,
            } => {
                let (dx, dy) = (x[0] - center[0], x[1] - center[1]);
                let s = ((dx * dx + dy * dy).sqrt() / radius * *rings as f64).min(*rings as f64);
                let a = (dy.atan2(dx) / (2.0 * PI)).rem_euclid(1.0) * *angles as f64;
                let j = (a.floor() as usize).min(angles - 1);
                let fa = a - j as f64;
                let at = |i: usize, j: usize| 1 + (i - 1) * angles + j % angles;
                let i = (s.floor() as usize).min(rings - 1);
                let t = s - i as f64;
                let (i0, i1) = if i == 0 { (0, 0) } else { (at(i, j), at(i, j + 1)) };
                [
                    (i0, (1.0 - t) * (1.0 - fa)),
                    (i1, (1.0 - t) * fa),
                    (at(i + 1, j), t * (1.0 - fa)),
                    (at(i + 1, j + 1), t * fa),
                ]
            }
            Layout::Cartesian { lower, step, counts } => {
                let mut idx = [0usize; 2];
                let mut frac = [0.0; 2];
                for d in 0..2 {
                    let s = ((x[d] - lower[d]) / step[d]).clamp(0.0, counts[d] as f64);
                    idx[d] = (s.floor() as usize).min(counts[d] - 1);
                    frac[d] = s - idx[d] as f64;
                }
                let at = |i: usize, j: usize| j * (counts[0] + 1) + i;
                let (i, j) = (idx[0], idx[1]);
                let (fx, fy) = (frac[0], frac[1]);
                [
                    (at(i, j), (1.0 - fx) * (1.0 - fy)),
                    (at(i + 1, j), fx * (1.0 - fy)),
                    (at(i, j + 1), (1.0 - fx) * fy),
                    (at(i + 1, j + 1), fx * fy),
                ]
            }
        }
    }

    fn interpolate(&self, x: &[f64]) -> f64 {
        self.weights(x).iter().map(|(k, w)| w * self.values[*k]).sum()
    }
}

impl ScalarField for PerronField {
    fn dim(&self) -> usize {
        2
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.interpolate(x)
    }
}

#[derive(Debug, Clone)]
pub struct PerronResult {
    pub field: PerronField,
    pub sweeps: Vec<SweepRecord>,
    pub converged: bool,
}

impl PerronResult {
    /// Largest decrease over all sweeps.
    pub fn max_dip(&self) -> f64 {
        self.sweeps.iter().map(|s| s.max_dip).fold(0.0, f64::max)
    }

    /// CSV with columns sweep,max_update,max_dip.
    pub fn log_csv(&self) -> String {
        let mut out = String::from("sweep,max_update,max_dip\n");
        for s in &self.sweeps {
            out.push_str(&format!("{},{},{}\n", s.sweep, s.max_update, s.max_dip));
        }
        out
    }
}

/// Circle samples per disk mean.
const CIRCLE_SAMPLES: usize = 64;

/// Perron iteration for the Dirichlet problem of the Laplacian in 2D.
///
/// Nodes on or outside ∂Ω hold the data. Interior nodes start at the minimum
/// of the data, a subsolution, and are visited round-robin: node x takes the
/// value at x of the harmonic lift of the current field on the disk
/// B(x, d/2), d = dist(x, ∂Ω), i.e. the circle mean. Each sweep is monotone
/// nondecreasing because the update is an average with positive weights.
/// Stops when a sweep changes no value by more than `tolerance`.
pub fn perron_solve(
    domain: &Domain,
    g: impl Fn(&[f64]) -> f64,
    grid: PerronGrid,
    max_sweeps: usize,
    tolerance: f64,
) -> Result<PerronResult, HarmonicError> {
    let layout = match (domain, grid) {
        (Domain::Disk { center, radius }, PerronGrid::Polar { rings, angles }) if rings >= 2 && angles >= 3 => {
            Layout::Polar {
                center: *center,
                radius: *radius,
                rings,
                angles,
            }
        }
        (Domain::Polygon { .. } | Domain::Rectangle { .. }, PerronGrid::Cartesian { spacing }) if spacing > 0.0 => {
            if domain.dim() != 2 {
                return Err(HarmonicError::UnsupportedDimension(domain.dim()));
            }
            let (lo, hi) = domain.bounding_box();
            let counts = [0, 1].map(|d| (((hi[d] - lo[d]) / spacing).round() as usize).max(2));
            Layout::Cartesian {
                lower: [lo[0], lo[1]],
                step: [0, 1].map(|d| (hi[d] - lo[d]) / counts[d] as f64),
                counts,
            }
        }
        _ => {
            return Err(HarmonicError::InvalidArgument(
                "perron needs a disk with a polar grid or a polygon with a Cartesian grid".into(),
            ))
        }
    };
    let count = match &layout {
        Layout::Polar { rings, angles, .. } => 1 + rings * angles,
        Layout::Cartesian { counts, .. } => (counts[0] + 1) * (counts[1] + 1),
    };
    let mut field = PerronField {
        layout,
        values: vec![0.0; count],
        fixed: vec![false; count],
    };
    let scale = domain.diameter();
    let mut clearance = vec![0.0; count];
    for k in 0..count {
        let x = field.node(k);
        let on_rim = matches!(&field.layout, Layout::Polar { rings, angles, .. } if k > (rings - 1) * angles);
        let d = domain.signed_distance(&x);
        if on_rim || d <= 1e-12 * scale {
            field.fixed[k] = true;
            field.values[k] = g(&x);
        }
        clearance[k] = d;
    }
    let start = field
        .values
        .iter()
        .zip(&field.fixed)
        .filter(|(_, f)| **f)
        .map(|(v, _)| *v)
        .fold(f64::INFINITY, f64::min);
    for k in 0..count {
        if !field.fixed[k] {
            field.values[k] = start;
        }
    }
    // Each update is a fixed nonnegative combination of node values, so the
    // circle-mean stencils are assembled once.
    let stencils: Vec<Vec<(usize, f64)>> = (0..count)
        .map(|k| {
            if field.fixed[k] {
                return Vec::new();
            }
            let x = field.node(k);
            let rad = 0.5 * clearance[k];
            let mut entries: Vec<(usize, f64)> = (0..CIRCLE_SAMPLES)
                .flat_map(|j| {
                    let t = 2.0 * PI * j as f64 / CIRCLE_SAMPLES as f64;
                    field.weights(&[x[0] + rad * t.cos(), x[1] + rad * t.sin()])
                })
                .filter(|(_, w)| *w > 0.0)
                .map(|(i, w)| (i, w / CIRCLE_SAMPLES as f64))
                .collect();
            entries.sort_by_key(|e| e.0);
            entries.dedup_by(|b, a| {
                let same = a.0 == b.0;
                if same {
                    a.1 += b.1;
                }
                same
            });
            entries
        })
        .collect();
    let mut sweeps = Vec::new();
    let mut converged = false;
    for sweep in 1..=max_sweeps {
        let (mut max_update, mut max_dip) = (0.0f64, 0.0f64);
        for (k, stencil) in stencils.iter().enumerate() {
            if field.fixed[k] {
                continue;
            }
            let mean: f64 = stencil.iter().map(|(i, w)| w * field.values[*i]).sum();
            let change = mean - field.values[k];
            max_update = max_update.max(change.abs());
            max_dip = max_dip.max(-change);
            field.values[k] = mean;
        }
        sweeps.push(SweepRecord {
            sweep,
            max_update,
            max_dip,
        });
        if max_update <= tolerance {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(HarmonicError::NonConvergence {
            sweeps: max_sweeps,
            last_update: sweeps.last().map_or(f64::INFINITY, |s| s.max_update),
        });
    }
    Ok(PerronResult {
        field,
        sweeps,
        converged,
    })
}
