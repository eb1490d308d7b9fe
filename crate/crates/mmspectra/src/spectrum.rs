//! Eigendecomposition of rho-Laplacians and the full rho-sweep.
//!
//! The map `rho -> sorted spectrum` is piecewise constant: it only changes
//! when `rho` crosses a pairwise distance. The sweep therefore eigensolves
//! once per distinct-distance interval (exact recomputation per breakpoint;
//! the approximate rank-one updates traded accuracy for speed and are not
//! used here). Interval `m` covers `(d_m, d_{m+1}]` with `d_0 = 0` and
//! `d_{M+1} = +inf`, consistent with strict `d < rho` edge inclusion.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::laplacian::{edge_events, group_events, AuxiliaryGraph, RhoLaplacian};
use crate::mmspace::MmSpace;

/// Relative threshold below which an eigenvalue counts as zero.
pub fn zero_eigenvalue_tol(lambda_max: f64) -> f64 {
    1e-10 * 1.0f64.max(lambda_max)
}

/// Sorted eigenvalues (ascending, so `values[0] = 0` for any Laplacian) with
/// optional orthonormal eigenvectors aligned column-by-column.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub values: Vec<f64>,
    pub vectors: Option<DMatrix<f64>>,
}

impl Spectrum {
    /// The all-zero spectrum of an edgeless graph on `k` nodes.
    pub fn zero(k: usize, want_vectors: bool) -> Self {
        Spectrum {
            values: vec![0.0; k],
            vectors: want_vectors.then(|| DMatrix::identity(k, k)),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn lambda_max(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }

    /// Number of (numerically) zero eigenvalues; equals the number of
    /// connected components of the auxiliary graph.
    pub fn zero_count(&self) -> usize {
        self.values.iter().filter(|&&v| v == 0.0).count()
    }
}

/// Ascending eigendecomposition of a symmetric Laplacian. Eigenvalues within
/// `1e-10 * max(1, lambda_max)` of zero are clamped to exactly zero so that
/// component counting stays robust.
pub fn eig(lap: &RhoLaplacian, want_vectors: bool) -> Result<Spectrum> {
    eig_matrix(&lap.matrix, want_vectors)
}

pub(crate) fn eig_matrix(matrix: &DMatrix<f64>, want_vectors: bool) -> Result<Spectrum> {
    let k = matrix.nrows();
    if matrix.iter().all(|&x| x == 0.0) {
        return Ok(Spectrum::zero(k, want_vectors));
    }
    let decomp = crate::symeig::decompose(matrix, want_vectors).ok_or_else(|| Error::EigenFailed {
        size: k,
        max_abs: matrix.iter().fold(0.0f64, |a, &x| a.max(x.abs())),
    })?;
    let mut values = decomp.values;
    let tol = zero_eigenvalue_tol(values.last().copied().unwrap_or(0.0));
    for v in values.iter_mut() {
        if v.abs() <= tol {
            *v = 0.0;
        }
    }
    Ok(Spectrum {
        values,
        vectors: decomp.vectors,
    })
}

/// The piecewise-constant map `rho -> spectrum`, stored as breakpoints (the
/// distinct pairwise distances) plus one spectrum per interval.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralCurve {
    pub breakpoints: Vec<f64>,
    pub spectra: Vec<Spectrum>,
}

impl SpectralCurve {
    /// Node count of the underlying space.
    pub fn k(&self) -> usize {
        self.spectra[0].len()
    }

    /// Index of the interval containing `rho`; a breakpoint `d` itself maps
    /// to the interval `(d_prev, d]`, matching strict edge inclusion.
    pub fn interval_index(&self, rho: f64) -> usize {
        self.breakpoints.partition_point(|&d| d < rho)
    }

    pub fn spectrum_at(&self, rho: f64) -> &Spectrum {
        &self.spectra[self.interval_index(rho)]
    }

    pub fn values_at(&self, rho: f64) -> &[f64] {
        &self.spectrum_at(rho).values
    }

    /// Spectrum once every finite-distance edge is present.
    pub fn complete(&self) -> &Spectrum {
        self.spectra.last().expect("curve has at least one interval")
    }

    /// A representative rho strictly inside interval `m` (midpoints between
    /// breakpoints; past the last breakpoint, half the final gap above it).
    pub fn interval_midpoint(&self, m: usize) -> f64 {
        let bp = &self.breakpoints;
        if bp.is_empty() {
            return 1.0;
        }
        if m == 0 {
            return bp[0] / 2.0;
        }
        if m < bp.len() {
            return (bp[m - 1] + bp[m]) / 2.0;
        }
        let last = bp[bp.len() - 1];
        let gap = if bp.len() >= 2 {
            (last - bp[bp.len() - 2]) / 2.0
        } else {
            last.max(1.0) / 2.0
        };
        last + gap
    }
}

/// Compute the full spectral curve of a space. Intervals are independent
/// eigensolves and run in parallel; tied distances collapse into a single
/// breakpoint so all tied edges enter together.
pub fn sweep(space: &MmSpace, want_vectors: bool) -> Result<SpectralCurve> {
    let k = space.node_count();
    let events = edge_events(space);
    let (breakpoints, ranges) = group_events(&events);
    let spectra: Result<Vec<Spectrum>> = (0..=breakpoints.len())
        .into_par_iter()
        .map(|m| {
            if m == 0 {
                return Ok(Spectrum::zero(k, want_vectors));
            }
            let mut matrix = DMatrix::zeros(k, k);
            for e in &events[..ranges[m - 1].end] {
                matrix[(e.i, e.j)] -= e.weight;
                matrix[(e.j, e.i)] -= e.weight;
                matrix[(e.i, e.i)] += e.weight;
                matrix[(e.j, e.j)] += e.weight;
            }
            eig_matrix(&matrix, want_vectors)
        })
        .collect();
    Ok(SpectralCurve {
        breakpoints,
        spectra: spectra?,
    })
}

/// The spectral measure `sum_j delta_{lambda_j} / K` as a right-continuous
/// step function from 0 to 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralCdf {
    /// Eigenvalues, ascending; each carries weight `1 / K`.
    pub atoms: Vec<f64>,
}

impl SpectralCdf {
    pub fn eval(&self, t: f64) -> f64 {
        self.atoms.partition_point(|&a| a <= t) as f64 / self.atoms.len() as f64
    }
}

pub fn spectral_cdf(spec: &Spectrum) -> SpectralCdf {
    SpectralCdf {
        atoms: spec.values.clone(),
    }
}

/// Gershgorin sandwich `max_deg <= lambda_max <= 2 max_deg`, stated both
/// through the degrees and through the local distribution of distances
/// `mass_j * (mu(B_rho(x_j)) - mass_j)`; a violation indicates a numerical
/// bug rather than bad input.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundsReport {
    pub max_degree: f64,
    pub local_dod_max_degree: f64,
    pub lambda_max: f64,
    /// `lambda_max - max_degree` (nonnegative when the lower bound holds).
    pub lower_margin: f64,
    /// `2 max_degree - lambda_max` (nonnegative when the upper bound holds).
    pub upper_margin: f64,
    pub violations: Vec<String>,
}

impl BoundsReport {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }
}

pub fn check_bounds(space: &MmSpace, graph: &AuxiliaryGraph, spec: &Spectrum) -> BoundsReport {
    let max_degree = graph.max_degree();
    let lambda_max = spec.lambda_max();
    let k = space.node_count();
    let (dist, mass) = (space.dist(), space.mass());
    let mut local_dod_max_degree = 0.0f64;
    for j in 0..k {
        let mut open_ball = 0.0;
        for l in 0..k {
            if dist[(j, l)] < graph.rho {
                open_ball += mass[l];
            }
        }
        local_dod_max_degree = local_dod_max_degree.max(mass[j] * (open_ball - mass[j]));
    }
    let scale = 1.0f64.max(lambda_max).max(max_degree);
    let tol = 1e-9 * scale;
    let mut violations = Vec::new();
    if (local_dod_max_degree - max_degree).abs() > tol {
        violations.push(format!(
            "local-DoD degree {local_dod_max_degree} disagrees with max degree {max_degree}"
        ));
    }
    if lambda_max < max_degree - tol {
        violations.push(format!("lambda_max {lambda_max} below max degree {max_degree}"));
    }
    if lambda_max > 2.0 * max_degree + tol {
        violations.push(format!(
            "lambda_max {lambda_max} above twice the max degree {max_degree}"
        ));
    }
    BoundsReport {
        max_degree,
        local_dod_max_degree,
        lambda_max,
        lower_margin: lambda_max - max_degree,
        upper_margin: 2.0 * max_degree - lambda_max,
        violations,
    }
}

/// Matrix-tree count `(1/K) * prod_{j>=2} lambda_j` for the spectrum of a
/// connected unweighted graph (for uniformly weighted graphs divide the
/// eigenvalues by the common weight first).
pub fn spanning_tree_count(spec: &Spectrum, k: usize) -> Result<f64> {
    if spec.len() != k {
        return Err(Error::VectorLength {
            expected: k,
            found: spec.len(),
        });
    }
    let zeros = spec.zero_count();
    if zeros != 1 {
        return Err(Error::Disconnected { components: zeros });
    }
    Ok(spec.values[1..].iter().product::<f64>() / k as f64)
}

/// Keep the `k_prime` smallest eigenvalues (and the matching eigenvector
/// columns when present).
pub fn truncate(spec: &Spectrum, k_prime: usize) -> Result<Spectrum> {
    if k_prime == 0 || k_prime > spec.len() {
        return Err(Error::KPrimeOutOfRange {
            k_prime,
            k: spec.len(),
        });
    }
    Ok(Spectrum {
        values: spec.values[..k_prime].to_vec(),
        vectors: spec.vectors.as_ref().map(|v| v.columns(0, k_prime).into_owned()),
    })
}
