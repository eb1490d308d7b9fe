//! Eigenvector analytics: the Fiedler harmonic, its sign-change region, the
//! spectral bisection, and the Euclidean embedding of an mm-space.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::laplacian::{edge_events, group_events, AuxiliaryGraph};
use crate::mmspace::MmSpace;
use crate::spectrum::{eig, zero_eigenvalue_tol, Spectrum};
use crate::unionfind::UnionFind;

/// Fiedler analysis of the auxiliary graph at a fixed rho.
#[derive(Debug, Clone, PartialEq)]
pub struct HarmonicReport {
    pub rho: f64,
    /// Second-smallest eigenvalue; strictly positive iff connected.
    pub fiedler_value: f64,
    /// Unit eigenvector, sign fixed so its first nonzero entry is positive.
    pub fiedler_vector: Vec<f64>,
    /// Nodes with nonnegative entries (zeros go to the positive side).
    pub positive: Vec<usize>,
    pub negative: Vec<usize>,
    /// The `ceil(q K)` nodes of smallest |entry| (plus boundary ties): the
    /// region where the harmonic changes sign.
    pub sign_region: Vec<usize>,
    /// Dimension of the Fiedler eigenspace. When it exceeds 1 the returned
    /// vector is one orthonormal representative and the split is
    /// non-canonical.
    pub multiplicity: usize,
}

fn connected_spectrum(space: &MmSpace, rho: f64) -> Result<(AuxiliaryGraph, Spectrum)> {
    let graph = AuxiliaryGraph::build(space, rho)?;
    let spec = eig(&graph.laplacian(), true)?;
    let components = spec.zero_count();
    if components != 1 {
        return Err(Error::Disconnected { components });
    }
    Ok((graph, spec))
}

/// Eigenvector of the second-smallest eigenvalue at `rho`, with the spectral
/// bisection (split by sign) and the fraction-`q` sign-change region.
pub fn fiedler(space: &MmSpace, rho: f64, q: f64) -> Result<HarmonicReport> {
    if q.is_nan() || q <= 0.0 || q >= 1.0 {
        return Err(Error::InvalidQ(q));
    }
    if space.node_count() < 2 {
        return Err(Error::TooFewNodes {
            needed: 2,
            got: space.node_count(),
        });
    }
    let (_, spec) = connected_spectrum(space, rho)?;
    let k = space.node_count();
    let vectors = spec.vectors.as_ref().expect("vectors requested");
    let fiedler_value = spec.values[1];
    let mut vector: Vec<f64> = vectors.column(1).iter().copied().collect();
    if let Some(first) = vector.iter().find(|v| v.abs() > 1e-12) {
        if *first < 0.0 {
            for v in vector.iter_mut() {
                *v = -*v;
            }
        }
    }
    let gap_tol = zero_eigenvalue_tol(spec.lambda_max()).max(1e-9 * fiedler_value.abs());
    let multiplicity = spec.values[1..]
        .iter()
        .take_while(|&&l| (l - fiedler_value).abs() <= gap_tol)
        .count();

    let (mut positive, mut negative) = (Vec::new(), Vec::new());
    for (i, &v) in vector.iter().enumerate() {
        if v >= 0.0 {
            positive.push(i);
        } else {
            negative.push(i);
        }
    }

    let mut by_abs: Vec<usize> = (0..k).collect();
    by_abs.sort_by(|&a, &b| vector[a].abs().partial_cmp(&vector[b].abs()).unwrap().then(a.cmp(&b)));
    let mut take = (q * k as f64).ceil() as usize;
    // include entries tied with the boundary magnitude
    while take < k {
        let (next, boundary) = (vector[by_abs[take]].abs(), vector[by_abs[take - 1]].abs());
        if (next - boundary).abs() > 1e-12 * 1.0f64.max(boundary) {
            break;
        }
        take += 1;
    }
    let mut sign_region = by_abs[..take].to_vec();
    sign_region.sort_unstable();

    Ok(HarmonicReport {
        rho,
        fiedler_value,
        fiedler_vector: vector,
        positive,
        negative,
        sign_region,
        multiplicity,
    })
}

/// The smallest breakpoint `d*` such that the auxiliary graph is connected
/// for every `rho > d*`: the longest edge of a minimum spanning tree,
/// obtained by union-find over ascending edge events. Callers should
/// evaluate strictly above the returned value (e.g. at a midpoint).
pub fn min_connected_rho(space: &MmSpace) -> Result<f64> {
    let k = space.node_count();
    if k == 1 {
        // a single node is connected at any rho; there is no breakpoint
        return Ok(0.0);
    }
    let events = edge_events(space);
    let (breakpoints, ranges) = group_events(&events);
    let mut uf = UnionFind::new(k);
    for (m, range) in ranges.iter().enumerate() {
        for e in &events[range.clone()] {
            uf.union(e.i, e.j);
        }
        if uf.component_count() == 1 {
            return Ok(breakpoints[m]);
        }
    }
    Err(Error::NeverConnected {
        components: uf.component_count(),
    })
}

/// A rho strictly inside the first interval on which the auxiliary graph is
/// connected: the midpoint between the connecting breakpoint and the next
/// distinct distance above it (tie-aware), suitable for direct evaluation.
pub fn connecting_rho(space: &MmSpace) -> Result<f64> {
    let d_star = min_connected_rho(space)?;
    if d_star == 0.0 {
        return Ok(1.0); // single node: connected at any threshold
    }
    let k = space.node_count();
    let dist = space.dist();
    let tol = crate::mmspace::DIST_TIE_TOL * 1.0f64.max(d_star.abs());
    let mut above = f64::INFINITY;
    for i in 0..k {
        for j in (i + 1)..k {
            let d = dist[(i, j)];
            if d.is_finite() && d > d_star + tol {
                above = above.min(d);
            }
        }
    }
    Ok(if above.is_finite() {
        (d_star + above) / 2.0
    } else {
        d_star * 1.5
    })
}

/// The rho-indexed Euclidean embedding
/// `X_em = diag(lambda_2, ..., lambda_K)^{-1/2} U^T`
/// restricted to the nonzero eigenpairs; row `r` (eigenpair `r + 2`) scales
/// the unit eigenvector by the inverse square root of its eigenvalue, so
/// inverse eigenvalues give the variability along each principal direction.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    pub rho: f64,
    /// `(K - 1) x K`: one row per nonzero eigenpair, ascending.
    pub coords: DMatrix<f64>,
}

/// Embed a space at `rho`; defined only when the auxiliary graph is
/// connected (so that every retained eigenvalue is positive).
pub fn embed(space: &MmSpace, rho: f64) -> Result<Embedding> {
    let (_, spec) = connected_spectrum(space, rho)?;
    let k = space.node_count();
    let vectors = spec.vectors.as_ref().expect("vectors requested");
    let mut coords = DMatrix::zeros(k - 1, k);
    for r in 0..k - 1 {
        let lambda = spec.values[r + 1];
        debug_assert!(lambda > 0.0);
        let row = vectors.column(r + 1).transpose() / lambda.sqrt();
        coords.set_row(r, &row);
    }
    Ok(Embedding { rho, coords })
}
