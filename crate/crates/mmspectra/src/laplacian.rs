//! The rho-dependent auxiliary graph of an mm-space and its Laplacian.
//!
//! For a threshold `rho > 0` the auxiliary graph connects nodes `j, l` with
//! weight `W[j, l] = mass[j] * mass[l]` whenever `d(j, l) < rho` (strict
//! inequality, no self-loops). Its Laplacian `L = Deg - W` decomposes as a
//! sum of size-two Laplacians over edges, `L = sum_e w_e b_e b_e^T` with
//! `b_e = e_i - e_j`, which is what the sweep exploits.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::mmspace::{MmSpace, DIST_TIE_TOL};
use crate::unionfind::UnionFind;

/// The rho-thresholded weighted graph induced by an mm-space.
#[derive(Debug, Clone, PartialEq)]
pub struct AuxiliaryGraph {
    pub rho: f64,
    /// Symmetric nonnegative weight matrix with zero diagonal.
    pub weights: DMatrix<f64>,
    /// Row sums of `weights`.
    pub degrees: DVector<f64>,
}

impl AuxiliaryGraph {
    /// Threshold the space at `rho` (strictly: pairs at distance exactly
    /// `rho` are excluded).
    pub fn build(space: &MmSpace, rho: f64) -> Result<Self> {
        if rho.is_nan() || rho <= 0.0 {
            return Err(Error::NonPositiveRho(rho));
        }
        let k = space.node_count();
        let (dist, mass) = (space.dist(), space.mass());
        let mut weights = DMatrix::zeros(k, k);
        for i in 0..k {
            for j in (i + 1)..k {
                if dist[(i, j)] < rho {
                    let w = mass[i] * mass[j];
                    weights[(i, j)] = w;
                    weights[(j, i)] = w;
                }
            }
        }
        let degrees = DVector::from_iterator(k, (0..k).map(|i| weights.row(i).sum()));
        Ok(AuxiliaryGraph {
            rho,
            weights,
            degrees,
        })
    }

    /// `L = Deg - W`.
    pub fn laplacian(&self) -> RhoLaplacian {
        let k = self.weights.nrows();
        let mut matrix = -self.weights.clone();
        for i in 0..k {
            matrix[(i, i)] = self.degrees[i];
        }
        RhoLaplacian {
            rho: self.rho,
            matrix,
        }
    }

    pub fn max_degree(&self) -> f64 {
        self.degrees.iter().copied().fold(0.0, f64::max)
    }
}

/// Laplacian of the auxiliary graph at a given rho. Symmetric positive
/// semidefinite with the all-ones vector in its null space.
#[derive(Debug, Clone, PartialEq)]
pub struct RhoLaplacian {
    pub rho: f64,
    pub matrix: DMatrix<f64>,
}

impl RhoLaplacian {
    /// Wrap an explicit symmetric matrix (used by tests and by callers that
    /// already hold a Laplacian).
    pub fn from_matrix(matrix: DMatrix<f64>, rho: f64) -> Self {
        RhoLaplacian { rho, matrix }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }
}

/// One potential edge of the auxiliary graph: the pair `(i, j)` enters every
/// graph with `rho > distance` and contributes weight `mass[i] * mass[j]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeEvent {
    pub i: usize,
    pub j: usize,
    pub distance: f64,
    pub weight: f64,
}

/// All finite-distance pairs `i < j`, ascending by distance, ties broken by
/// `(i, j)` lexicographic order.
pub fn edge_events(space: &MmSpace) -> Vec<EdgeEvent> {
    let k = space.node_count();
    let (dist, mass) = (space.dist(), space.mass());
    let mut events = Vec::with_capacity(k * (k.saturating_sub(1)) / 2);
    for i in 0..k {
        for j in (i + 1)..k {
            let d = dist[(i, j)];
            if d.is_finite() {
                events.push(EdgeEvent {
                    i,
                    j,
                    distance: d,
                    weight: mass[i] * mass[j],
                });
            }
        }
    }
    events.sort_by(|a, b| {
        a.distance
            .partial_cmp(&b.distance)
            .unwrap()
            .then(a.i.cmp(&b.i))
            .then(a.j.cmp(&b.j))
    });
    events
}

/// Group ascending events into breakpoints, merging distances that tie
/// within [`DIST_TIE_TOL`]. Returns `(breakpoints, group ranges)` where
/// `ranges[m]` indexes into `events`.
pub(crate) fn group_events(events: &[EdgeEvent]) -> (Vec<f64>, Vec<std::ops::Range<usize>>) {
    let mut breakpoints = Vec::new();
    let mut ranges = Vec::new();
    let mut start = 0;
    while start < events.len() {
        let d = events[start].distance;
        let mut end = start + 1;
        while end < events.len()
            && (events[end].distance - d).abs() <= DIST_TIE_TOL * 1.0f64.max(d.abs())
        {
            end += 1;
        }
        breakpoints.push(d);
        ranges.push(start..end);
        start = end;
    }
    (breakpoints, ranges)
}

/// Apply the discrete rho-Laplace operator to `u`:
///
/// `(Delta u)(x_j) = [1 / (rho^2 mu(B_rho(x_j)))] * sum_{l : d(j,l) < rho} (u_j - u_l) mass[l]`
///
/// The ball is open and always contains its centre, so the normalization is
/// strictly positive. Note the operator carries the `1/rho^2` factor that
/// the auxiliary-graph Laplacian does not.
pub fn apply_operator(space: &MmSpace, rho: f64, u: &DVector<f64>) -> Result<DVector<f64>> {
    if rho.is_nan() || rho <= 0.0 {
        return Err(Error::NonPositiveRho(rho));
    }
    let k = space.node_count();
    if u.len() != k {
        return Err(Error::VectorLength {
            expected: k,
            found: u.len(),
        });
    }
    let (dist, mass) = (space.dist(), space.mass());
    let mut out = DVector::zeros(k);
    for j in 0..k {
        let mut ball_mass = mass[j]; // centre is always inside
        let mut acc = 0.0;
        for l in 0..k {
            if l != j && dist[(j, l)] < rho {
                ball_mass += mass[l];
                acc += (u[j] - u[l]) * mass[l];
            }
        }
        out[j] = acc / (rho * rho * ball_mass);
    }
    Ok(out)
}

/// Number of connected components of the auxiliary graph at `rho`,
/// determined by union-find over thresholded edges.
pub fn component_count(space: &MmSpace, rho: f64) -> usize {
    let k = space.node_count();
    let dist = space.dist();
    let mut uf = UnionFind::new(k);
    for i in 0..k {
        for j in (i + 1)..k {
            if dist[(i, j)] < rho {
                uf.union(i, j);
            }
        }
    }
    uf.component_count()
}
