//! Finite metric measure spaces: a symmetric distance matrix plus a strictly
//! positive mass per node.
//!
//! Disconnected node pairs carry an `f64::INFINITY` sentinel so that the
//! threshold `d < rho` stays well defined for every finite `rho`.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use nalgebra::{DMatrix, DVector};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Distances closer than this are treated as equal everywhere downstream
/// (breakpoint merging, quantile-grid shifting).
pub const DIST_TIE_TOL: f64 = 1e-12;

/// Tolerance used by [`MmSpace::validate`] for the triangle inequality.
pub const TRIANGLE_TOL: f64 = 1e-9;

/// How masses are assigned when constructing a space from raw inputs.
#[derive(Debug, Clone, PartialEq)]
pub enum MassPolicy {
    /// Every node gets `total_mass / K`.
    Uniform { total_mass: f64 },
    /// Caller-supplied masses, used as-is.
    Explicit { masses: Vec<f64> },
    /// Mass proportional to the summed distance to the node's neighbours,
    /// normalized to `total_mass`. For point clouds every other point counts
    /// as a neighbour; for graphs only adjacent nodes do.
    DegreeProportional { total_mass: f64 },
}

impl Default for MassPolicy {
    fn default() -> Self {
        MassPolicy::Uniform { total_mass: 1.0 }
    }
}

impl MassPolicy {
    /// Uniform masses summing to 1.
    pub fn uniform() -> Self {
        Self::default()
    }

    fn total_mass(&self) -> Option<f64> {
        match self {
            MassPolicy::Uniform { total_mass } | MassPolicy::DegreeProportional { total_mass } => {
                Some(*total_mass)
            }
            MassPolicy::Explicit { .. } => None,
        }
    }

    /// Resolve the policy into a mass vector. `neighbour_sums[j]` is the
    /// summed distance from node `j` to its neighbours (ignored unless the
    /// policy is degree-proportional).
    fn resolve(&self, k: usize, neighbour_sums: &[f64]) -> Result<DVector<f64>> {
        if let Some(t) = self.total_mass() {
            if t.is_nan() || t <= 0.0 {
                return Err(Error::NonPositiveTotalMass(t));
            }
        }
        match self {
            MassPolicy::Uniform { total_mass } => {
                Ok(DVector::from_element(k, total_mass / k as f64))
            }
            MassPolicy::Explicit { masses } => {
                if masses.len() != k {
                    return Err(Error::MassLength {
                        expected: k,
                        found: masses.len(),
                    });
                }
                for (i, &m) in masses.iter().enumerate() {
                    if !m.is_finite() || m <= 0.0 {
                        return Err(Error::NonPositiveMass { index: i, value: m });
                    }
                }
                Ok(DVector::from_column_slice(masses))
            }
            MassPolicy::DegreeProportional { total_mass } => {
                let mut raw: Vec<f64> = neighbour_sums.to_vec();
                debug_assert_eq!(raw.len(), k);
                // Isolated nodes would get zero mass, which violates the
                // mass invariant; give them the smallest positive raw mass.
                let min_positive = raw.iter().copied().filter(|&m| m > 0.0).fold(f64::INFINITY, f64::min);
                if min_positive.is_finite() {
                    for m in raw.iter_mut() {
                        if *m <= 0.0 {
                            *m = min_positive;
                        }
                    }
                } else {
                    // No node has a neighbour at all: fall back to uniform.
                    raw = vec![1.0; k];
                }
                let sum: f64 = raw.iter().sum();
                Ok(DVector::from_iterator(k, raw.iter().map(|m| m / sum * total_mass)))
            }
        }
    }
}

/// A rule broken by an [`MmSpace`], reported by [`MmSpace::validate`].
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    Asymmetric { i: usize, j: usize },
    NonzeroDiagonal { i: usize },
    NegativeDistance { i: usize, j: usize },
    NanDistance { i: usize, j: usize },
    NonPositiveMass { i: usize },
    TriangleInequality { i: usize, j: usize, k: usize },
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Violation::Asymmetric { i, j } => write!(f, "asymmetry at ({i}, {j})"),
            Violation::NonzeroDiagonal { i } => write!(f, "nonzero diagonal at {i}"),
            Violation::NegativeDistance { i, j } => write!(f, "negative distance at ({i}, {j})"),
            Violation::NanDistance { i, j } => write!(f, "NaN distance at ({i}, {j})"),
            Violation::NonPositiveMass { i } => write!(f, "nonpositive mass at {i}"),
            Violation::TriangleInequality { i, j, k } => {
                write!(f, "triangle violation at ({i}, {j}, {k})")
            }
        }
    }
}

/// A finite metric measure space: `K` nodes, a `K x K` distance matrix and a
/// strictly positive mass per node. Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct MmSpace {
    dist: DMatrix<f64>,
    mass: DVector<f64>,
    labels: Option<Vec<String>>,
}

impl MmSpace {
    /// Wrap a distance matrix and mass vector. Only shape compatibility is
    /// enforced here; rule violations are reported by [`validate`](Self::validate)
    /// so that questionable data can still be inspected.
    pub fn new(dist: DMatrix<f64>, mass: DVector<f64>) -> Result<Self> {
        if dist.nrows() != dist.ncols() {
            return Err(Error::NotSquare {
                rows: dist.nrows(),
                cols: dist.ncols(),
            });
        }
        if dist.nrows() == 0 {
            return Err(Error::EmptySpace);
        }
        if mass.len() != dist.nrows() {
            return Err(Error::MassLength {
                expected: dist.nrows(),
                found: mass.len(),
            });
        }
        Ok(MmSpace {
            dist,
            mass,
            labels: None,
        })
    }

    /// Build from plain nested vectors (row-major distance matrix).
    pub fn from_raw(dist: Vec<Vec<f64>>, mass: Vec<f64>) -> Result<Self> {
        let rows = dist.len();
        let cols = dist.first().map_or(0, |r| r.len());
        for r in &dist {
            if r.len() != cols {
                return Err(Error::NotSquare { rows, cols: r.len() });
            }
        }
        let m = DMatrix::from_fn(rows, cols, |i, j| dist[i][j]);
        MmSpace::new(m, DVector::from_column_slice(&mass))
    }

    /// Attach node labels.
    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.node_count() {
            return Err(Error::LabelLength {
                expected: self.node_count(),
                found: labels.len(),
            });
        }
        self.labels = Some(labels);
        Ok(self)
    }

    /// Number of nodes `K`.
    pub fn node_count(&self) -> usize {
        self.dist.nrows()
    }

    pub fn dist(&self) -> &DMatrix<f64> {
        &self.dist
    }

    pub fn mass(&self) -> &DVector<f64> {
        &self.mass
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn total_mass(&self) -> f64 {
        self.mass.sum()
    }

    /// Report every broken invariant. Returns an empty list iff the space is
    /// a valid (semi-)metric measure space; the triangle inequality is only
    /// checked when `check_triangle` is set since the rho-Laplacian needs no
    /// more than a symmetric dissimilarity.
    pub fn validate(&self, check_triangle: bool) -> Vec<Violation> {
        let k = self.node_count();
        let mut out = Vec::new();
        for i in 0..k {
            if self.dist[(i, i)] != 0.0 {
                out.push(Violation::NonzeroDiagonal { i });
            }
            if !self.mass[i].is_finite() || self.mass[i] <= 0.0 {
                out.push(Violation::NonPositiveMass { i });
            }
        }
        for i in 0..k {
            for j in (i + 1)..k {
                let (a, b) = (self.dist[(i, j)], self.dist[(j, i)]);
                if a.is_nan() || b.is_nan() {
                    out.push(Violation::NanDistance { i, j });
                    continue;
                }
                if a != b && (a - b).abs() > DIST_TIE_TOL * 1.0f64.max(a.abs().max(b.abs())) {
                    out.push(Violation::Asymmetric { i, j });
                }
                if a < 0.0 || b < 0.0 {
                    out.push(Violation::NegativeDistance { i, j });
                }
            }
        }
        if check_triangle {
            for i in 0..k {
                for j in (i + 1)..k {
                    let d_ij = self.dist[(i, j)];
                    if d_ij.is_nan() {
                        continue;
                    }
                    for via in 0..k {
                        if via == i || via == j {
                            continue;
                        }
                        let detour = self.dist[(i, via)] + self.dist[(via, j)];
                        if detour.is_nan() {
                            continue;
                        }
                        if d_ij > detour + TRIANGLE_TOL {
                            out.push(Violation::TriangleInequality { i, j, k: via });
                        }
                    }
                }
            }
        }
        out
    }

    /// Build a space from an `N x D` coordinate matrix with Euclidean
    /// distances and masses assigned per `policy`.
    pub fn from_points(coords: &DMatrix<f64>, policy: &MassPolicy) -> Result<Self> {
        let n = coords.nrows();
        if n == 0 {
            return Err(Error::EmptySpace);
        }
        for i in 0..n {
            for d in 0..coords.ncols() {
                if !coords[(i, d)].is_finite() {
                    return Err(Error::NonFiniteCoordinate { row: i, col: d });
                }
            }
        }
        let mut dist = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in (i + 1)..n {
                let d = (coords.row(i) - coords.row(j)).norm();
                dist[(i, j)] = d;
                dist[(j, i)] = d;
            }
        }
        let sums: Vec<f64> = (0..n).map(|i| dist.row(i).sum()).collect();
        let mass = policy.resolve(n, &sums)?;
        MmSpace::new(dist, mass)
    }

    /// Build a space from a weighted undirected edge list. Distances are
    /// all-pairs shortest paths; unreachable pairs get the `INFINITY`
    /// sentinel. The degree-proportional policy uses
    /// `mass_j proportional to sum over neighbours l of d(j, l)`.
    pub fn from_graph(
        edges: &[(usize, usize, f64)],
        n_nodes: usize,
        policy: &MassPolicy,
    ) -> Result<Self> {
        if n_nodes == 0 {
            return Err(Error::EmptySpace);
        }
        let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n_nodes];
        for &(i, j, len) in edges {
            if i >= n_nodes || j >= n_nodes {
                return Err(Error::EdgeOutOfRange { i, j, n_nodes });
            }
            if !len.is_finite() || len <= 0.0 {
                return Err(Error::NonPositiveEdgeLength { i, j, length: len });
            }
            if i == j {
                continue; // self-loops carry no metric information
            }
            adj[i].push((j, len));
            adj[j].push((i, len));
        }
        let rows: Vec<Vec<f64>> = (0..n_nodes)
            .into_par_iter()
            .map(|src| dijkstra(&adj, src))
            .collect();
        let dist = DMatrix::from_fn(n_nodes, n_nodes, |i, j| rows[i][j]);
        let sums: Vec<f64> = (0..n_nodes)
            .map(|j| {
                let mut seen = vec![false; n_nodes];
                let mut s = 0.0;
                for &(l, _) in &adj[j] {
                    if !seen[l] {
                        seen[l] = true;
                        s += dist[(j, l)];
                    }
                }
                s
            })
            .collect();
        let mass = policy.resolve(n_nodes, &sums)?;
        MmSpace::new(dist, mass)
    }

    /// Uniform without-replacement subsample of `size` nodes, deterministic
    /// given `seed`. When `renormalize` is set the restricted masses are
    /// rescaled to the original total mass.
    pub fn subsample(&self, size: usize, seed: u64, renormalize: bool) -> Result<Self> {
        let k = self.node_count();
        if size == 0 || size > k {
            return Err(Error::SubsampleSize { size, k });
        }
        let mut idx: Vec<usize> = (0..k).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for i in 0..size {
            let j = rng.random_range(i..k);
            idx.swap(i, j);
        }
        let chosen = &idx[..size];
        let dist = DMatrix::from_fn(size, size, |a, b| self.dist[(chosen[a], chosen[b])]);
        let mut mass = DVector::from_iterator(size, chosen.iter().map(|&c| self.mass[c]));
        if renormalize {
            let sum = mass.sum();
            if sum > 0.0 {
                mass *= self.total_mass() / sum;
            }
        }
        let mut out = MmSpace::new(dist, mass)?;
        if let Some(labels) = &self.labels {
            out = out.with_labels(chosen.iter().map(|&c| labels[c].clone()).collect())?;
        }
        Ok(out)
    }
}

#[derive(PartialEq)]
struct HeapEntry {
    dist: f64,
    node: usize,
}

impl Eq for HeapEntry {}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on distance; entries are always finite and non-NaN
        other
            .dist
            .partial_cmp(&self.dist)
            .unwrap_or(Ordering::Equal)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn dijkstra(adj: &[Vec<(usize, f64)>], src: usize) -> Vec<f64> {
    let n = adj.len();
    let mut dist = vec![f64::INFINITY; n];
    dist[src] = 0.0;
    let mut heap = BinaryHeap::new();
    heap.push(HeapEntry { dist: 0.0, node: src });
    while let Some(HeapEntry { dist: d, node }) = heap.pop() {
        if d > dist[node] {
            continue;
        }
        for &(next, len) in &adj[node] {
            let cand = d + len;
            if cand < dist[next] {
                dist[next] = cand;
                heap.push(HeapEntry { dist: cand, node: next });
            }
        }
    }
    dist
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_point(masses: (f64, f64), d: f64) -> MmSpace {
        MmSpace::from_raw(vec![vec![0.0, d], vec![d, 0.0]], vec![masses.0, masses.1]).unwrap()
    }

    #[test]
    fn minimal_valid_space_passes() {
        let s = two_point((0.5, 0.5), 1.0);
        assert!(s.validate(true).is_empty());
    }

    #[test]
    fn asymmetry_is_reported() {
        let s = MmSpace::from_raw(vec![vec![0.0, 1.0], vec![2.0, 0.0]], vec![0.5, 0.5]).unwrap();
        assert_eq!(s.validate(false), vec![Violation::Asymmetric { i: 0, j: 1 }]);
    }

    #[test]
    fn triangle_violation_is_reported_on_demand() {
        let s = MmSpace::from_raw(
            vec![
                vec![0.0, 1.0, 5.0],
                vec![1.0, 0.0, 1.0],
                vec![5.0, 1.0, 0.0],
            ],
            vec![1.0, 1.0, 1.0],
        )
        .unwrap();
        assert!(s.validate(false).is_empty());
        let v = s.validate(true);
        assert!(v.contains(&Violation::TriangleInequality { i: 0, j: 2, k: 1 }));
    }

    #[test]
    fn from_points_example_line() {
        // X = (0, 1, 4, 10, 12, 17) on the real line, uniform probability mass.
        let coords = DMatrix::from_column_slice(6, 1, &[0.0, 1.0, 4.0, 10.0, 12.0, 17.0]);
        let s = MmSpace::from_points(&coords, &MassPolicy::uniform()).unwrap();
        assert_eq!(s.node_count(), 6);
        assert_eq!(s.dist()[(2, 3)], 6.0);
        for j in 0..6 {
            assert!((s.mass()[j] - 1.0 / 6.0).abs() < 1e-15);
        }
        assert!(s.validate(true).is_empty());
    }

    #[test]
    fn from_points_single_point_and_coincident() {
        let one = DMatrix::from_row_slice(1, 2, &[3.0, 4.0]);
        let s = MmSpace::from_points(&one, &MassPolicy::Uniform { total_mass: 2.5 }).unwrap();
        assert_eq!(s.node_count(), 1);
        assert_eq!(s.dist()[(0, 0)], 0.0);
        assert_eq!(s.mass()[0], 2.5);

        let dup = DMatrix::from_row_slice(2, 1, &[1.0, 1.0]);
        let s = MmSpace::from_points(&dup, &MassPolicy::uniform()).unwrap();
        assert_eq!(s.dist()[(0, 1)], 0.0);
        assert!(s.validate(true).is_empty());
    }

    #[test]
    fn from_points_rejects_non_finite() {
        let coords = DMatrix::from_row_slice(2, 1, &[0.0, f64::NAN]);
        assert!(matches!(
            MmSpace::from_points(&coords, &MassPolicy::uniform()),
            Err(Error::NonFiniteCoordinate { row: 1, col: 0 })
        ));
    }

    #[test]
    fn from_graph_path_additivity() {
        let s = MmSpace::from_graph(&[(0, 1, 1.0), (1, 2, 1.0)], 3, &MassPolicy::uniform()).unwrap();
        assert_eq!(s.dist()[(0, 2)], 2.0);
    }

    #[test]
    fn from_graph_disconnected_sentinel() {
        let s = MmSpace::from_graph(&[(0, 1, 1.0), (2, 3, 1.0)], 4, &MassPolicy::uniform()).unwrap();
        assert!(s.dist()[(0, 2)].is_infinite());
        assert!(s.dist()[(1, 3)].is_infinite());
        assert_eq!(s.dist()[(0, 1)], 1.0);
    }

    #[test]
    fn from_graph_shortest_path_wins() {
        // Triangle with lengths 1, 1, 5: brute force over the three paths on
        // 3 nodes says d(0, 2) = min(5, 1 + 1) = 2.
        let s = MmSpace::from_graph(
            &[(0, 1, 1.0), (1, 2, 1.0), (0, 2, 5.0)],
            3,
            &MassPolicy::uniform(),
        )
        .unwrap();
        assert_eq!(s.dist()[(0, 2)], 2.0);
        assert!(s.validate(true).is_empty());
    }

    #[test]
    fn from_graph_rejects_bad_edges() {
        assert!(matches!(
            MmSpace::from_graph(&[(0, 5, 1.0)], 3, &MassPolicy::uniform()),
            Err(Error::EdgeOutOfRange { .. })
        ));
        assert!(matches!(
            MmSpace::from_graph(&[(0, 1, 0.0)], 2, &MassPolicy::uniform()),
            Err(Error::NonPositiveEdgeLength { .. })
        ));
    }

    #[test]
    fn degree_proportional_masses() {
        // Path 0 - 1 - 2 with lengths 1 and 2: sums are (1, 3, 2).
        let s = MmSpace::from_graph(
            &[(0, 1, 1.0), (1, 2, 2.0)],
            3,
            &MassPolicy::DegreeProportional { total_mass: 1.0 },
        )
        .unwrap();
        let m = s.mass();
        assert!((m[0] - 1.0 / 6.0).abs() < 1e-15);
        assert!((m[1] - 3.0 / 6.0).abs() < 1e-15);
        assert!((m[2] - 2.0 / 6.0).abs() < 1e-15);
        assert!((s.total_mass() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn degree_proportional_isolated_node_keeps_positive_mass() {
        let s = MmSpace::from_graph(
            &[(0, 1, 2.0)],
            3,
            &MassPolicy::DegreeProportional { total_mass: 1.0 },
        )
        .unwrap();
        // Node 2 is isolated; it receives the minimum positive raw mass (2.0)
        // before normalization, so masses are (2, 2, 2)/6.
        for j in 0..3 {
            assert!(s.mass()[j] > 0.0);
            assert!((s.mass()[j] - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn subsample_contracts() {
        let coords = DMatrix::from_column_slice(6, 1, &[0.0, 1.0, 4.0, 10.0, 12.0, 17.0]);
        let s = MmSpace::from_points(&coords, &MassPolicy::uniform()).unwrap();

        let full = s.subsample(6, 7, false).unwrap();
        assert_eq!(full.node_count(), 6);
        assert!((full.total_mass() - 1.0).abs() < 1e-12);

        let single = s.subsample(1, 7, false).unwrap();
        assert_eq!(single.node_count(), 1);

        let a = s.subsample(3, 123, true).unwrap();
        let b = s.subsample(3, 123, true).unwrap();
        assert_eq!(a, b);
        assert!((a.total_mass() - 1.0).abs() < 1e-12);

        assert!(matches!(
            s.subsample(0, 1, false),
            Err(Error::SubsampleSize { .. })
        ));
        assert!(matches!(
            s.subsample(7, 1, false),
            Err(Error::SubsampleSize { .. })
        ));
    }

    #[test]
    fn explicit_policy_checks_masses() {
        let coords = DMatrix::from_column_slice(2, 1, &[0.0, 1.0]);
        let bad = MassPolicy::Explicit {
            masses: vec![1.0, 0.0],
        };
        assert!(matches!(
            MmSpace::from_points(&coords, &bad),
            Err(Error::NonPositiveMass { index: 1, .. })
        ));
        let short = MassPolicy::Explicit { masses: vec![1.0] };
        assert!(matches!(
            MmSpace::from_points(&coords, &short),
            Err(Error::MassLength { .. })
        ));
    }

    #[test]
    fn two_point_helper_masses() {
        let s = two_point((0.75, 0.25), 1.0);
        assert_eq!(s.total_mass(), 1.0);
    }

    #[test]
    fn from_points_always_yields_a_metric() {
        use rand::{RngExt, SeedableRng};
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..50 {
            let n = rng.random_range(1..=10);
            let d = rng.random_range(1..=3);
            let coords = DMatrix::from_fn(n, d, |_, _| rng.random_range(-5.0..5.0));
            let s = MmSpace::from_points(&coords, &MassPolicy::uniform()).unwrap();
            assert!(s.validate(true).is_empty());
        }
    }
}
