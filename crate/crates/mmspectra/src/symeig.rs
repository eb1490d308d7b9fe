//! Dense symmetric eigensolver: Householder tridiagonalization followed by
//! implicit-shift QL iteration (the classical EISPACK tred2/tql2 pair).
//!
//! The sweep performs one eigensolve per distance interval, so the solver is
//! the hot path of the whole crate; the value-only variant skips the
//! transformation accumulation and the rotation of the eigenvector matrix.

use nalgebra::DMatrix;

pub(crate) struct SymEigen {
    /// Eigenvalues, ascending.
    pub values: Vec<f64>,
    /// Orthonormal eigenvectors as columns, aligned with `values`.
    pub vectors: Option<DMatrix<f64>>,
}

const MAX_QL_ITER: usize = 60;

/// Decompose a symmetric matrix. Returns `None` if the QL iteration fails to
/// deflate an eigenvalue within [`MAX_QL_ITER`] sweeps (which for symmetric
/// input indicates NaN contamination rather than hard spectra).
pub(crate) fn decompose(matrix: &DMatrix<f64>, want_vectors: bool) -> Option<SymEigen> {
    let n = matrix.nrows();
    debug_assert_eq!(n, matrix.ncols());
    if n == 0 {
        return Some(SymEigen {
            values: Vec::new(),
            vectors: want_vectors.then(|| DMatrix::zeros(0, 0)),
        });
    }
    let mut v = matrix.clone();
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    tred2(&mut v, &mut d, &mut e, want_vectors);
    if !tql2(&mut v, &mut d, &mut e, want_vectors) {
        return None;
    }
    Some(SymEigen {
        values: d,
        vectors: want_vectors.then_some(v),
    })
}

/// Householder reduction to tridiagonal form. On exit `d` holds the
/// diagonal, `e` the subdiagonal in `e[1..]`, and (with `want_vectors`) `v`
/// the accumulated orthogonal transformation.
fn tred2(v: &mut DMatrix<f64>, d: &mut [f64], e: &mut [f64], want_vectors: bool) {
    let n = d.len();
    for j in 0..n {
        d[j] = v[(n - 1, j)];
    }

    for i in (1..n).rev() {
        let mut scale = 0.0;
        let mut h = 0.0;
        for item in d.iter().take(i) {
            scale += item.abs();
        }
        if scale == 0.0 {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[(i - 1, j)];
                v[(i, j)] = 0.0;
                v[(j, i)] = 0.0;
            }
        } else {
            for item in d.iter_mut().take(i) {
                *item /= scale;
                h += *item * *item;
            }
            let f = d[i - 1];
            let mut g = h.sqrt();
            if f > 0.0 {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for item in e.iter_mut().take(i) {
                *item = 0.0;
            }

            // apply the similarity transformation to the leading block
            for j in 0..i {
                let f = d[j];
                v[(j, i)] = f;
                let mut g = e[j] + v[(j, j)] * f;
                for k in (j + 1)..i {
                    g += v[(k, j)] * d[k];
                    e[k] += v[(k, j)] * f;
                }
                e[j] = g;
            }
            let mut f = 0.0;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                let f = d[j];
                let g = e[j];
                for k in j..i {
                    v[(k, j)] -= f * e[k] + g * d[k];
                }
                d[j] = v[(i - 1, j)];
                v[(i, j)] = 0.0;
            }
        }
        d[i] = h;
    }

    if want_vectors {
        // accumulate the Householder transformations
        for i in 0..n - 1 {
            v[(n - 1, i)] = v[(i, i)];
            v[(i, i)] = 1.0;
            let h = d[i + 1];
            if h != 0.0 {
                for (k, item) in d.iter_mut().enumerate().take(i + 1) {
                    *item = v[(k, i + 1)] / h;
                }
                for j in 0..=i {
                    let mut g = 0.0;
                    for k in 0..=i {
                        g += v[(k, i + 1)] * v[(k, j)];
                    }
                    for (k, item) in d.iter().enumerate().take(i + 1) {
                        v[(k, j)] -= g * item;
                    }
                }
            }
            for k in 0..=i {
                v[(k, i + 1)] = 0.0;
            }
        }
        for j in 0..n {
            d[j] = v[(n - 1, j)];
            v[(n - 1, j)] = 0.0;
        }
        v[(n - 1, n - 1)] = 1.0;
    } else {
        // the reduced diagonal sits on v's diagonal; the h values in d are
        // only needed for the accumulation skipped above
        for j in 0..n {
            d[j] = v[(j, j)];
        }
    }
    e[0] = 0.0;
}

/// Implicit-shift QL iteration on the tridiagonal (d, e), rotating the
/// columns of `v` along when eigenvectors are wanted. Sorts ascending.
fn tql2(v: &mut DMatrix<f64>, d: &mut [f64], e: &mut [f64], want_vectors: bool) -> bool {
    let n = d.len();
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;

    let mut f = 0.0f64;
    let mut tst1 = 0.0f64;
    let eps = f64::EPSILON;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        if !tst1.is_finite() {
            return false;
        }
        let mut m = l;
        while m < n {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > MAX_QL_ITER {
                    return false;
                }

                let g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for item in d.iter_mut().take(n).skip(l + 2) {
                    *item -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    let g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    if want_vectors {
                        for k in 0..n {
                            h = v[(k, i + 1)];
                            v[(k, i + 1)] = s * v[(k, i)] + c * h;
                            v[(k, i)] = c * v[(k, i)] - s * h;
                        }
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;

                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }

    // selection sort ascending, dragging eigenvector columns along
    for i in 0..n.saturating_sub(1) {
        let offset = d[i..]
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .map(|(j, _)| j)
            .unwrap_or(0);
        let k = i + offset;
        if k != i {
            d.swap(i, k);
            if want_vectors {
                for row in 0..n {
                    v.swap((row, i), (row, k));
                }
            }
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_symmetric(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let x = rng.random_range(-2.0..2.0);
                m[(i, j)] = x;
                m[(j, i)] = x;
            }
        }
        m
    }

    #[test]
    fn matches_nalgebra_on_random_matrices() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..50 {
            let n = rng.random_range(1..=12);
            let m = random_symmetric(&mut rng, n);
            let ours = decompose(&m, true).unwrap();
            let mut reference: Vec<f64> =
                m.clone().symmetric_eigen().eigenvalues.iter().copied().collect();
            reference.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let scale = reference.iter().fold(1.0f64, |a, &x| a.max(x.abs()));
            for (got, want) in ours.values.iter().zip(&reference) {
                assert!((got - want).abs() <= 1e-9 * scale, "{got} vs {want}");
            }
        }
    }

    #[test]
    fn vectors_are_orthonormal_with_small_residuals() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..20 {
            let n = rng.random_range(2..=15);
            let m = random_symmetric(&mut rng, n);
            let eig = decompose(&m, true).unwrap();
            let v = eig.vectors.as_ref().unwrap();
            let gram = v.transpose() * v;
            assert!((gram - DMatrix::identity(n, n)).abs().max() < 1e-10);
            let scale = eig.values.iter().fold(1.0f64, |a, &x| a.max(x.abs()));
            for (j, &lambda) in eig.values.iter().enumerate() {
                let resid = &m * v.column(j) - v.column(j) * lambda;
                assert!(resid.abs().max() <= 1e-10 * scale);
            }
        }
    }

    #[test]
    fn value_only_agrees_with_vector_path() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let n = rng.random_range(1..=20);
            let m = random_symmetric(&mut rng, n);
            let plain = decompose(&m, false).unwrap();
            let full = decompose(&m, true).unwrap();
            let scale = full.values.iter().fold(1.0f64, |a, &x| a.max(x.abs()));
            for (a, b) in plain.values.iter().zip(&full.values) {
                assert!((a - b).abs() <= 1e-12 * scale);
            }
            assert!(plain.vectors.is_none());
        }
    }

    #[test]
    fn handles_special_shapes() {
        // diagonal input
        let m = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&[3.0, -1.0, 2.0]));
        let eig = decompose(&m, true).unwrap();
        assert_eq!(eig.values, vec![-1.0, 2.0, 3.0]);

        // 1x1 and zero matrices
        let one = DMatrix::from_element(1, 1, 4.0);
        assert_eq!(decompose(&one, false).unwrap().values, vec![4.0]);
        let zero = DMatrix::zeros(3, 3);
        assert_eq!(decompose(&zero, false).unwrap().values, vec![0.0; 3]);

        // NaN input must fail rather than spin
        let mut bad = DMatrix::zeros(2, 2);
        bad[(0, 1)] = f64::NAN;
        bad[(1, 0)] = f64::NAN;
        assert!(decompose(&bad, false).is_none());
    }
}
