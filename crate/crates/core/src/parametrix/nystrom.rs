use nalgebra::{DMatrix, DVector, Dyn, LU};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::{polar_integral, ParametrixError, NEAR_RULE};
use crate::geometry::{Domain, Quadrature};
use crate::linalg::linear_fit;
use crate::small::dist;

/// Which kernel a grid discretizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    /// The parametrix H itself.
    Parametrix,
    /// The residual kernel K = L_xH.
    Residual,
    /// The j-fold composition of a kernel with itself.
    Iterated(usize),
    /// The correction density G of a fundamental solution.
    Correction,
    Custom,
}

/// Dense Nyström discretization of a weakly singular integral operator.
///
/// `matrix[(i, j)]` approximates the contribution of node j to
/// ∫ k(xᵢ, z)σ(z)dz, so the operator acts on nodal densities by a plain
/// matrix-vector product. Off the diagonal the entry is wⱼ k(xᵢ, xⱼ). The
/// integral over B(xᵢ, δ) ∩ Ω is computed by a polar rule against a locally
/// constant density, and the difference to the plain near-field sum is put
/// on the diagonal (singularity subtraction).
#[derive(Debug, Clone)]
pub struct KernelGrid {
    pub kind: KernelKind,
    /// Declared Hölder exponent: |k(x, y)| ≤ C|x − y|^{−n+α}.
    pub alpha: f64,
    dim: usize,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    cutoff: f64,
    spacing: f64,
    near_field_norm: f64,
    matrix: DMatrix<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExponentFit {
    pub slope: f64,
    pub intercept: f64,
    pub rms: f64,
    pub samples: usize,
}

/// Singularity of ∫|x − z|^{α₀−n}|z − y|^{α₁−n}dz as y → x.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CompositionLaw {
    /// α₀ + α₁ < n: |x − y|^{α₀+α₁−n}.
    Power { exponent: f64 },
    /// α₀ + α₁ = n: |ln|x − y||.
    Logarithmic,
    /// α₀ + α₁ > n: bounded.
    Bounded,
}

pub fn composition_law(n: usize, alpha0: f64, alpha1: f64) -> CompositionLaw {
    let s = alpha0 + alpha1 - n as f64;
    if s.abs() < 1e-12 {
        CompositionLaw::Logarithmic
    } else if s < 0.0 {
        CompositionLaw::Power { exponent: s }
    } else {
        CompositionLaw::Bounded
    }
}

/// Largest distance from a node to its nearest neighbour.
fn max_nearest_spacing(dim: usize, nodes: &[f64]) -> f64 {
    let n = nodes.len() / dim;
    (0..n)
        .into_par_iter()
        .map(|i| {
            let xi = &nodes[i * dim..(i + 1) * dim];
            (0..n)
                .filter(|&j| j != i)
                .map(|j| dist(xi, &nodes[j * dim..(j + 1) * dim]))
                .fold(f64::INFINITY, f64::min)
        })
        .reduce(|| 0.0, f64::max)
}

/// Plain and corrected quadrature rows for a target point.
pub(crate) struct RowBuilder<'a> {
    pub domain: &'a Domain,
    pub dim: usize,
    pub nodes: &'a [f64],
    pub weights: &'a [f64],
    pub kernel: &'a (dyn Fn(&[f64], &[f64]) -> f64 + Sync),
    pub cutoff: f64,
}

impl RowBuilder<'_> {
    fn node(&self, j: usize) -> &[f64] {
        &self.nodes[j * self.dim..(j + 1) * self.dim]
    }

    /// Weights r with Σⱼ rⱼσⱼ ≈ ∫ k(x, z)σ(z)dz, and ∫_{B(x,δ)∩Ω}|k(x, z)|dz.
    pub fn row(&self, x: &[f64]) -> Result<(Vec<f64>, f64), ParametrixError> {
        let count = self.weights.len();
        let mut row = vec![0.0; count];
        let mut nearest = (0, f64::INFINITY);
        let mut near_sum = 0.0;
        for (j, r) in row.iter_mut().enumerate() {
            let z = self.node(j);
            let d = dist(x, z);
            if d < nearest.1 {
                nearest = (j, d);
            }
            if d > 0.0 {
                *r = self.weights[j] * (self.kernel)(x, z);
                if d < self.cutoff {
                    near_sum += *r;
                }
            }
        }
        let near = polar_integral(Some(self.domain), x, self.cutoff, NEAR_RULE, &|z| (self.kernel)(x, z))?;
        let near_abs = polar_integral(Some(self.domain), x, self.cutoff, NEAR_RULE, &|z| (self.kernel)(x, z).abs())?;
        row[nearest.0] += near - near_sum;
        Ok((row, near_abs))
    }
}

/// Nyström matrix of `kernel` on the nodes of `quad` with cutoff δ = 2·spacing.
pub fn nystrom_assemble(
    domain: &Domain,
    quad: &Quadrature,
    kernel: &(dyn Fn(&[f64], &[f64]) -> f64 + Sync),
    kind: KernelKind,
    alpha: f64,
) -> Result<KernelGrid, ParametrixError> {
    let spacing = max_nearest_spacing(quad.dim(), quad.nodes());
    nystrom_assemble_with_cutoff(domain, quad, kernel, kind, alpha, 2.0 * spacing)
}

/// As [`nystrom_assemble`] with an explicit near-field radius δ.
pub fn nystrom_assemble_with_cutoff(
    domain: &Domain,
    quad: &Quadrature,
    kernel: &(dyn Fn(&[f64], &[f64]) -> f64 + Sync),
    kind: KernelKind,
    alpha: f64,
    cutoff: f64,
) -> Result<KernelGrid, ParametrixError> {
    let dim = quad.dim();
    if dim != domain.dim() || !(2..=3).contains(&dim) {
        return Err(ParametrixError::UnsupportedDimension(dim));
    }
    if quad.len() < 2 {
        return Err(ParametrixError::InvalidArgument("quadrature needs at least two nodes".into()));
    }
    let spacing = max_nearest_spacing(dim, quad.nodes());
    if !(cutoff >= spacing) {
        return Err(ParametrixError::UnresolvedSingularity { cutoff, spacing });
    }
    let builder = RowBuilder {
        domain,
        dim,
        nodes: quad.nodes(),
        weights: quad.weights(),
        kernel,
        cutoff,
    };
    let n = quad.len();
    let rows: Vec<(Vec<f64>, f64)> = (0..n)
        .into_par_iter()
        .map(|i| builder.row(quad.node(i)))
        .collect::<Result<_, _>>()?;
    let near_field_norm = rows.iter().map(|r| r.1).fold(0.0, f64::max);
    let flat: Vec<f64> = rows.into_iter().flat_map(|r| r.0).collect();
    if flat.iter().any(|v| !v.is_finite()) {
        return Err(ParametrixError::InvalidArgument("kernel produced non-finite values".into()));
    }
    Ok(KernelGrid {
        kind,
        alpha,
        dim,
        nodes: quad.nodes().to_vec(),
        weights: quad.weights().to_vec(),
        cutoff,
        spacing,
        near_field_norm,
        matrix: DMatrix::from_row_slice(n, n, &flat),
    })
}

impl KernelGrid {
    /// Grid from an already weighted matrix; for constructed test operators.
    pub fn from_weighted_matrix(
        quad: &Quadrature,
        matrix: DMatrix<f64>,
        kind: KernelKind,
        alpha: f64,
    ) -> Result<Self, ParametrixError> {
        if matrix.nrows() != quad.len() || matrix.ncols() != quad.len() {
            return Err(ParametrixError::InvalidArgument("matrix size differs from node count".into()));
        }
        let spacing = max_nearest_spacing(quad.dim(), quad.nodes());
        Ok(KernelGrid {
            kind,
            alpha,
            dim: quad.dim(),
            nodes: quad.nodes().to_vec(),
            weights: quad.weights().to_vec(),
            cutoff: 2.0 * spacing,
            spacing,
            near_field_norm: 0.0,
            matrix,
        })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn node(&self, i: usize) -> &[f64] {
        &self.nodes[i * self.dim..(i + 1) * self.dim]
    }

    /// Node coordinates, `dim` per node.
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn cutoff(&self) -> f64 {
        self.cutoff
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// Largest ∫_{B(xᵢ,δ)∩Ω}|k(xᵢ, z)|dz over the nodes: the norm of the
    /// truncated near-field part of the operator.
    pub fn near_field_norm(&self) -> f64 {
        self.near_field_norm
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// Kernel value recovered from an off-diagonal entry.
    pub fn kernel_value(&self, i: usize, j: usize) -> f64 {
        self.matrix[(i, j)] / self.weights[j]
    }

    pub fn apply(&self, density: &[f64]) -> Vec<f64> {
        (&self.matrix * DVector::from_column_slice(density)).as_slice().to_vec()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.apply(&vec![1.0; self.len()])
    }

    /// Log-log slope of |k(xᵢ, ·)| against distance from node `row`.
    ///
    /// Distances in [r_min, r_max] are split into ten logarithmic bins and
    /// the largest |k| of each bin enters the fit, which tolerates
    /// direction-dependent kernels.
    pub fn fit_exponent(&self, row: usize, r_min: f64, r_max: f64) -> Result<ExponentFit, ParametrixError> {
        const BINS: usize = 10;
        let xi = self.node(row);
        let mut best = [(0.0f64, 0.0f64); BINS];
        let width = (r_max / r_min).ln() / BINS as f64;
        for j in 0..self.len() {
            let d = dist(xi, self.node(j));
            if j == row || d < r_min || d > r_max {
                continue;
            }
            let b = (((d / r_min).ln() / width) as usize).min(BINS - 1);
            let v = self.kernel_value(row, j).abs();
            if v > best[b].1 {
                best[b] = (d, v);
            }
        }
        let used: Vec<(f64, f64)> = best.iter().filter(|p| p.1 > 0.0).map(|p| (p.0.ln(), p.1.ln())).collect();
        if used.len() < 4 {
            return Err(ParametrixError::InsufficientSamples {
                found: used.len(),
                required: 4,
            });
        }
        let (x, y): (Vec<f64>, Vec<f64>) = used.into_iter().unzip();
        let (slope, intercept, rms) = linear_fit(&x, &y);
        Ok(ExponentFit {
            slope,
            intercept,
            rms,
            samples: x.len(),
        })
    }

    /// Smallest C with |k(xᵢ, xⱼ)| ≤ C|xᵢ − xⱼ|^{−n+α} over node pairs at distance ≥ r_min.
    pub fn bound_constant(&self, r_min: f64) -> f64 {
        let power = self.dim as f64 - self.alpha;
        (0..self.len())
            .into_par_iter()
            .map(|i| {
                (0..self.len())
                    .filter_map(|j| {
                        let d = dist(self.node(i), self.node(j));
                        (j != i && d >= r_min).then(|| self.kernel_value(i, j).abs() * d.powf(power))
                    })
                    .fold(0.0, f64::max)
            })
            .reduce(|| 0.0, f64::max)
    }
}

/// Discrete composition ∫ a(x, z) b(z, y) dz on a shared node set.
pub fn compose(a: &KernelGrid, b: &KernelGrid) -> Result<KernelGrid, ParametrixError> {
    if a.nodes != b.nodes {
        return Err(ParametrixError::InvalidArgument("kernels live on different nodes".into()));
    }
    let alpha = (a.alpha + b.alpha).min(a.dim as f64);
    Ok(KernelGrid {
        kind: KernelKind::Custom,
        alpha,
        matrix: &a.matrix * &b.matrix,
        near_field_norm: 0.0,
        ..a.clone()
    })
}

/// j-th iterated kernel K_j, K_{j+1}(x, y) = ∫K(x, z)K_j(z, y)dz.
pub fn iterated_kernel(grid: &KernelGrid, j: usize) -> Result<KernelGrid, ParametrixError> {
    if j == 0 {
        return Err(ParametrixError::InvalidArgument("iteration index starts at 1".into()));
    }
    let mut out = grid.clone();
    for _ in 1..j {
        out = compose(grid, &out)?;
    }
    if j > 1 {
        out.kind = KernelKind::Iterated(j);
    }
    Ok(out)
}

/// Conditioning of I − A for a Nyström matrix A.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DefectDiagnostics {
    pub sigma_min: f64,
    pub norm: f64,
    /// σ_min/‖I − A‖; the solve is refused below `threshold`.
    pub ratio: f64,
    pub threshold: f64,
    /// Power-iteration estimate of the spectral radius of A.
    pub spectral_radius: f64,
}

/// Threshold on σ_min(I − A)/‖I − A‖.
pub const DEFECT_THRESHOLD: f64 = 1e-6;

/// Factored I − A.
#[derive(Debug, Clone)]
pub struct FredholmSystem {
    lu: LU<f64, Dyn, Dyn>,
    pub diagnostics: DefectDiagnostics,
}

fn normalize(v: &mut DVector<f64>) -> f64 {
    let n = v.norm();
    if n > 0.0 {
        *v /= n;
    }
    n
}

/// Factors I − A and rejects it when σ_min(I − A) < 1e-6·‖I − A‖₂.
///
/// ‖I − A‖₂ comes from power iteration on (I − A)ᵀ(I − A) and σ_min from
/// inverse iteration with the LU factors of I − A and its transpose.
pub fn factor_fredholm(grid: &KernelGrid) -> Result<FredholmSystem, ParametrixError> {
    const ITERATIONS: usize = 60;
    let n = grid.len();
    let system = DMatrix::identity(n, n) - &grid.matrix;
    let mut rng = ChaCha8Rng::seed_from_u64(0x00e1_1e57);
    let start = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));

    let mut v = start.clone();
    normalize(&mut v);
    let mut norm_sq = 0.0;
    for _ in 0..ITERATIONS {
        let mut w = system.tr_mul(&(&system * &v));
        norm_sq = normalize(&mut w);
        v = w;
    }
    let norm = norm_sq.sqrt();

    let mut radius_v = start.clone();
    normalize(&mut radius_v);
    let mut growth = Vec::with_capacity(ITERATIONS);
    for _ in 0..ITERATIONS {
        let mut w = &grid.matrix * &radius_v;
        growth.push(normalize(&mut w));
        radius_v = w;
    }
    let tail = &growth[ITERATIONS / 2..];
    let spectral_radius = tail.iter().map(|g| g.max(f64::MIN_POSITIVE).ln()).sum::<f64>().exp().powf(1.0 / tail.len() as f64);

    let defect = |sigma_min: f64| ParametrixError::NontrivialDefect { sigma_min, norm };
    let lu = system.clone().lu();
    let lu_t = system.transpose().lu();
    let mut v = start;
    normalize(&mut v);
    let mut inv_sq = 0.0;
    for _ in 0..ITERATIONS {
        let x = lu.solve(&v).ok_or_else(|| defect(0.0))?;
        let mut z = lu_t.solve(&x).ok_or_else(|| defect(0.0))?;
        inv_sq = normalize(&mut z);
        if !inv_sq.is_finite() {
            return Err(defect(0.0));
        }
        v = z;
    }
    let sigma_min = 1.0 / inv_sq.sqrt();
    let diagnostics = DefectDiagnostics {
        sigma_min,
        norm,
        ratio: sigma_min / norm,
        threshold: DEFECT_THRESHOLD,
        spectral_radius,
    };
    if !(diagnostics.ratio >= DEFECT_THRESHOLD) {
        return Err(defect(sigma_min));
    }
    Ok(FredholmSystem { lu, diagnostics })
}

impl FredholmSystem {
    /// Solves (I − A)X = B column by column in parallel.
    pub fn solve(&self, rhs: &DMatrix<f64>) -> Result<DMatrix<f64>, ParametrixError> {
        const BLOCK: usize = 32;
        let (rows, cols) = rhs.shape();
        let starts: Vec<usize> = (0..cols).step_by(BLOCK).collect();
        let blocks: Vec<DMatrix<f64>> = starts
            .par_iter()
            .map(|&s| {
                let block = rhs.columns(s, BLOCK.min(cols - s)).into_owned();
                self.lu.solve(&block).ok_or(ParametrixError::NontrivialDefect {
                    sigma_min: 0.0,
                    norm: self.diagnostics.norm,
                })
            })
            .collect::<Result<_, _>>()?;
        let mut out = DMatrix::zeros(rows, cols);
        for (s, b) in starts.iter().zip(blocks) {
            out.columns_mut(*s, b.ncols()).copy_from(&b);
        }
        Ok(out)
    }
}
