//! Shape signatures and dissimilarities between mm-spaces.
//!
//! The headline signature is the rho-spectral distance
//! `sup_rho || Lambda_1^rho - Lambda_2^rho ||_2`, with the supremum replaced
//! by a maximum over a quantile grid of the pooled pairwise distances. The
//! distribution of distances (DoD) and its local variant are implemented as
//! comparison baselines: they are Gromov-Wasserstein lower-bound signatures
//! that the rho-spectra strictly refine on the worked examples.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mmspace::{MmSpace, DIST_TIE_TOL};
use crate::spectrum::SpectralCurve;

/// Ascending evaluation grid for the supremum over rho.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantileGrid {
    pub values: Vec<f64>,
}

impl QuantileGrid {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Empirical type-7 quantile of sorted data at level `p`.
fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    let h = (n - 1) as f64 * p;
    let lo = h.floor() as usize;
    if lo + 1 >= n {
        return sorted[n - 1];
    }
    sorted[lo] + (h - lo as f64) * (sorted[lo + 1] - sorted[lo])
}

fn ties(a: f64, b: f64) -> bool {
    a == b || (a - b).abs() <= DIST_TIE_TOL * 1.0f64.max(a.abs().max(b.abs()))
}

/// Build the evaluation grid from the pooled lower-triangle distances of a
/// collection of spaces: quantiles at levels `l / (g - 1)`. Grid points that
/// land exactly on a pooled distance (a breakpoint of some curve) are shifted
/// to the midpoint of the interval above so that every evaluation happens
/// strictly inside an interval.
pub fn build_grid(spaces: &[MmSpace], g: usize) -> Result<QuantileGrid> {
    if g < 2 {
        return Err(Error::GridTooSmall(g));
    }
    let mut pooled = Vec::new();
    for s in spaces {
        let dist = s.dist();
        for i in 0..s.node_count() {
            for j in (i + 1)..s.node_count() {
                if dist[(i, j)].is_finite() {
                    pooled.push(dist[(i, j)]);
                }
            }
        }
    }
    if pooled.is_empty() {
        return Err(Error::NoFiniteDistances);
    }
    pooled.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut distinct: Vec<f64> = Vec::with_capacity(pooled.len());
    for &d in &pooled {
        if distinct.last().is_none_or(|&last| !ties(last, d)) {
            distinct.push(d);
        }
    }
    let mut values: Vec<f64> = (0..g)
        .map(|l| quantile_sorted(&pooled, l as f64 / (g - 1) as f64))
        .collect();
    for v in values.iter_mut() {
        let idx = distinct.partition_point(|&d| d < *v);
        for cand in [idx.wrapping_sub(1), idx] {
            if let Some(&d) = distinct.get(cand) {
                if ties(d, *v) {
                    *v = midpoint_above(&distinct, cand);
                    break;
                }
            }
        }
    }
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(QuantileGrid { values })
}

/// Representative point strictly inside the interval above `distinct[idx]`.
fn midpoint_above(distinct: &[f64], idx: usize) -> f64 {
    let d = distinct[idx];
    if idx + 1 < distinct.len() {
        (d + distinct[idx + 1]) / 2.0
    } else if idx > 0 {
        d + (d - distinct[idx - 1]) / 2.0
    } else {
        d + d.abs().max(1.0) / 2.0
    }
}

fn truncated_norm_diff(a: &[f64], b: &[f64], k_prime: usize) -> f64 {
    (0..k_prime)
        .map(|k| {
            let d = a[k] - b[k];
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

fn check_k_prime(curve: &SpectralCurve, k_prime: usize) -> Result<()> {
    if k_prime == 0 || k_prime > curve.k() {
        return Err(Error::KPrimeOutOfRange {
            k_prime,
            k: curve.k(),
        });
    }
    Ok(())
}

/// Max over the grid of the Euclidean norm between the two truncated,
/// ascending spectra. Symmetric and zero for identical curves, but only a
/// pseudometric on signatures (no triangle inequality is claimed).
pub fn spectral_distance(
    a: &SpectralCurve,
    b: &SpectralCurve,
    grid: &QuantileGrid,
    k_prime: usize,
) -> Result<f64> {
    check_k_prime(a, k_prime)?;
    check_k_prime(b, k_prime)?;
    Ok(grid
        .values
        .iter()
        .map(|&rho| truncated_norm_diff(a.values_at(rho), b.values_at(rho), k_prime))
        .fold(0.0, f64::max))
}

/// Exact supremum variant: since both curves are piecewise constant, the sup
/// is attained on the merged breakpoint intervals, which are enumerated
/// directly instead of sampling a grid.
pub fn spectral_distance_exact(a: &SpectralCurve, b: &SpectralCurve, k_prime: usize) -> Result<f64> {
    check_k_prime(a, k_prime)?;
    check_k_prime(b, k_prime)?;
    let mut merged: Vec<f64> = a
        .breakpoints
        .iter()
        .chain(b.breakpoints.iter())
        .copied()
        .collect();
    merged.sort_by(|x, y| x.partial_cmp(y).unwrap());
    merged.dedup_by(|x, y| ties(*x, *y));
    let mut best = 0.0f64;
    for m in 0..=merged.len() {
        let rho = if merged.is_empty() {
            1.0
        } else if m == 0 {
            merged[0] / 2.0
        } else if m < merged.len() {
            (merged[m - 1] + merged[m]) / 2.0
        } else {
            midpoint_above(&merged, merged.len() - 1)
        };
        if rho.is_nan() || rho <= 0.0 {
            continue; // below the smallest distance both spectra are zero anyway
        }
        best = best.max(truncated_norm_diff(
            a.values_at(rho),
            b.values_at(rho),
            k_prime,
        ));
    }
    Ok(best)
}

/// Symmetric nonnegative matrix of pairwise signature distances.
#[derive(Debug, Clone, PartialEq)]
pub struct SignatureDistanceMatrix {
    pub matrix: DMatrix<f64>,
}

impl SignatureDistanceMatrix {
    pub fn from_matrix(matrix: DMatrix<f64>) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::NotSquare {
                rows: matrix.nrows(),
                cols: matrix.ncols(),
            });
        }
        Ok(SignatureDistanceMatrix { matrix })
    }

    pub fn n(&self) -> usize {
        self.matrix.nrows()
    }
}

/// All pairwise spectral distances, parallel over pairs.
pub fn pairwise_distances(
    curves: &[SpectralCurve],
    grid: &QuantileGrid,
    k_prime: usize,
) -> Result<SignatureDistanceMatrix> {
    let n = curves.len();
    for c in curves {
        check_k_prime(c, k_prime)?;
    }
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
        .collect();
    let dists: Result<Vec<f64>> = pairs
        .par_iter()
        .map(|&(i, j)| spectral_distance(&curves[i], &curves[j], grid, k_prime))
        .collect();
    let dists = dists?;
    let mut matrix = DMatrix::zeros(n, n);
    for (&(i, j), &d) in pairs.iter().zip(dists.iter()) {
        matrix[(i, j)] = d;
        matrix[(j, i)] = d;
    }
    Ok(SignatureDistanceMatrix { matrix })
}

/// Distribution of distances: the mass-weighted CDF
/// `t -> (mu x mu){(x, x') : d(x, x') <= t}`, including the diagonal, with
/// both orders of each pair counted.
#[derive(Debug, Clone, PartialEq)]
pub struct DoD {
    /// Sorted pair distances with their `mass_i * mass_j` weights.
    atoms: Vec<(f64, f64)>,
    /// Cumulative weights aligned with `atoms`.
    cumulative: Vec<f64>,
    /// `(total mass)^2`, the CDF limit when all distances are finite.
    pub total: f64,
}

impl DoD {
    /// `(mu x mu){d <= t}`.
    pub fn eval(&self, t: f64) -> f64 {
        let idx = self.atoms.partition_point(|&(d, _)| d <= t);
        if idx == 0 {
            0.0
        } else {
            self.cumulative[idx - 1]
        }
    }

    /// Jump locations of the CDF.
    pub fn support(&self) -> impl Iterator<Item = f64> + '_ {
        self.atoms.iter().map(|&(d, _)| d)
    }
}

pub fn dod(space: &MmSpace) -> DoD {
    let k = space.node_count();
    let (dist, mass) = (space.dist(), space.mass());
    let mut atoms = Vec::with_capacity(k * k);
    for i in 0..k {
        for j in 0..k {
            let d = if i == j { 0.0 } else { dist[(i, j)] };
            if d.is_finite() {
                atoms.push((d, mass[i] * mass[j]));
            }
        }
    }
    atoms.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let mut cumulative = Vec::with_capacity(atoms.len());
    let mut acc = 0.0;
    for &(_, w) in &atoms {
        acc += w;
        cumulative.push(acc);
    }
    let total = space.total_mass().powi(2);
    DoD {
        atoms,
        cumulative,
        total,
    }
}

/// Sup-norm distance between two DoD step functions, evaluated over the
/// union of their jump points.
pub fn dod_distance(a: &DoD, b: &DoD) -> f64 {
    a.support()
        .chain(b.support())
        .map(|t| (a.eval(t) - b.eval(t)).abs())
        .fold(0.0, f64::max)
}

/// Local distribution of distances: per node `j` the step function
/// `h(x_j, t) = sum_l mass_l 1{d(j, l) <= t}` (the closed-ball mass, which
/// includes the node itself from `t = 0` on).
#[derive(Debug, Clone, PartialEq)]
pub struct LocalDoD {
    /// Per node: sorted `(distance, mass)` pairs over all nodes.
    per_node: Vec<Vec<(f64, f64)>>,
    pub total: f64,
}

impl LocalDoD {
    pub fn node_count(&self) -> usize {
        self.per_node.len()
    }

    /// Closed-ball mass `h(x_j, t)`.
    pub fn eval(&self, j: usize, t: f64) -> f64 {
        self.per_node[j]
            .iter()
            .take_while(|&&(d, _)| d <= t)
            .map(|&(_, m)| m)
            .sum()
    }

    /// Open-ball mass `mu(B_t(x_j)) = sum_l mass_l 1{d(j, l) < t}`, the left
    /// limit `h(x_j, t-)`.
    pub fn eval_open(&self, j: usize, t: f64) -> f64 {
        self.per_node[j]
            .iter()
            .take_while(|&&(d, _)| d < t)
            .map(|&(_, m)| m)
            .sum()
    }
}

pub fn local_dod(space: &MmSpace) -> LocalDoD {
    let k = space.node_count();
    let (dist, mass) = (space.dist(), space.mass());
    let per_node = (0..k)
        .map(|j| {
            let mut row: Vec<(f64, f64)> = (0..k)
                .map(|l| (if l == j { 0.0 } else { dist[(j, l)] }, mass[l]))
                .filter(|&(d, _)| d.is_finite())
                .collect();
            row.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
            row
        })
        .collect();
    LocalDoD {
        per_node,
        total: space.total_mass(),
    }
}

/// Classical multidimensional scaling of a distance matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct MdsResult {
    /// `n x dims` coordinates, centred at the origin.
    pub coords: DMatrix<f64>,
    /// All eigenvalues of the doubly centred Gram matrix, descending.
    /// Negative values measure how far the input is from Euclidean.
    pub eigenvalues: Vec<f64>,
    /// Number of (numerically) positive eigenvalues. Requested dimensions
    /// beyond this count are padded with zeros.
    pub positive: usize,
}

/// Double-centre `-1/2 J D^2 J`, take the top `dims` eigenpairs, and scale
/// eigenvectors by the square roots of their eigenvalues. Axis signs are
/// fixed by making the largest-magnitude loading positive.
pub fn classical_mds(d: &SignatureDistanceMatrix, dims: usize) -> Result<MdsResult> {
    if dims == 0 {
        return Err(Error::ZeroDims);
    }
    let n = d.n();
    let sq = d.matrix.map(|x| x * x);
    let row_mean: Vec<f64> = (0..n).map(|i| sq.row(i).sum() / n as f64).collect();
    let grand = row_mean.iter().sum::<f64>() / n as f64;
    let b = DMatrix::from_fn(n, n, |i, j| {
        -0.5 * (sq[(i, j)] - row_mean[i] - row_mean[j] + grand)
    });
    let spec = crate::spectrum::eig_matrix(&b, true)?;
    let vectors = spec.vectors.as_ref().expect("vectors requested");
    // eig_matrix sorts ascending; MDS wants descending
    let eigenvalues: Vec<f64> = spec.values.iter().rev().copied().collect();
    let scale = eigenvalues
        .first()
        .map_or(1.0, |&l| 1.0f64.max(l.abs()));
    let positive = eigenvalues.iter().filter(|&&l| l > 1e-12 * scale).count();
    let mut coords = DMatrix::zeros(n, dims);
    for (dim, &lambda) in eigenvalues.iter().enumerate().take(dims.min(positive)) {
        let col = vectors.column(n - 1 - dim);
        let mut axis = col * lambda.sqrt();
        let dominant = axis
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.abs().partial_cmp(&b.1.abs()).unwrap())
            .map(|(i, _)| i)
            .unwrap_or(0);
        if axis[dominant] < 0.0 {
            axis = -axis;
        }
        coords.set_column(dim, &axis);
    }
    Ok(MdsResult {
        coords,
        eigenvalues,
        positive,
    })
}
