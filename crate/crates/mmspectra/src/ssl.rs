//! Semi-supervised label propagation on the rho-auxiliary graph.
//!
//! Scores solve the convex problem
//!
//! `argmin_f ||Y - f||^2 + tau * f^T L_sym f`
//!
//! with `L_sym = I - D^{-1/2} W D^{-1/2}` on the non-isolated nodes and
//! `Y_j = 0` off the labelled set, i.e. `(I + tau L_sym) f = Y`. Masses
//! enter through the auxiliary-graph weights `W[j, l] = mass_j mass_l`, so
//! importance weights shape the propagation while the `D^{-1/2}`
//! normalization keeps the solution invariant under rescaling all masses.

use std::collections::BTreeMap;

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::{Error, Result};
use crate::laplacian::AuxiliaryGraph;
use crate::mmspace::MmSpace;

/// A labelled-node problem instance. Labels live in {+1, -1}.
#[derive(Debug, Clone)]
pub struct SslProblem<'a> {
    pub space: &'a MmSpace,
    pub rho: f64,
    pub tau: f64,
    pub labeled: BTreeMap<usize, i8>,
}

impl<'a> SslProblem<'a> {
    pub fn new(
        space: &'a MmSpace,
        rho: f64,
        tau: f64,
        labeled: BTreeMap<usize, i8>,
    ) -> Result<Self> {
        if rho.is_nan() || rho <= 0.0 {
            return Err(Error::NonPositiveRho(rho));
        }
        if tau.is_nan() || tau <= 0.0 {
            return Err(Error::NonPositiveTau(tau));
        }
        if labeled.is_empty() {
            return Err(Error::NoLabels);
        }
        for (&index, &value) in &labeled {
            if index >= space.node_count() {
                return Err(Error::LabelOutOfRange {
                    index,
                    k: space.node_count(),
                });
            }
            if value != 1 && value != -1 {
                return Err(Error::InvalidLabel { index, value });
            }
        }
        Ok(SslProblem {
            space,
            rho,
            tau,
            labeled,
        })
    }

    /// Zero-filled label vector.
    fn label_vector(&self) -> DVector<f64> {
        let mut y = DVector::zeros(self.space.node_count());
        for (&i, &v) in &self.labeled {
            y[i] = v as f64;
        }
        y
    }
}

/// Scores, sign predictions and diagnostics for a solved instance.
#[derive(Debug, Clone, PartialEq)]
pub struct SslSolution {
    pub scores: DVector<f64>,
    /// `sign(score)` with zero mapped to +1.
    pub predictions: Vec<i8>,
    /// Objective value at the solution.
    pub objective: f64,
    /// Unlabelled nodes isolated at this rho: their score is 0 and the +1
    /// prediction carries no evidence.
    pub no_evidence: Vec<usize>,
}

struct SymLaplacian {
    /// Nodes with positive degree, ascending.
    nodes: Vec<usize>,
    /// `I - D^{-1/2} W D^{-1/2}` restricted to those nodes.
    matrix: DMatrix<f64>,
}

fn sym_laplacian(space: &MmSpace, rho: f64) -> Result<SymLaplacian> {
    let graph = AuxiliaryGraph::build(space, rho)?;
    let nodes: Vec<usize> = (0..space.node_count())
        .filter(|&j| graph.degrees[j] > 0.0)
        .collect();
    let m = nodes.len();
    let mut matrix = DMatrix::identity(m, m);
    for (a, &i) in nodes.iter().enumerate() {
        for (b, &j) in nodes.iter().enumerate() {
            let w = graph.weights[(i, j)];
            if w > 0.0 {
                matrix[(a, b)] -= w / (graph.degrees[i] * graph.degrees[j]).sqrt();
            }
        }
    }
    Ok(SymLaplacian { nodes, matrix })
}

/// Solve for the scores. Isolated nodes are excluded from the regularizer
/// and keep their label value (zero when unlabelled).
pub fn solve(problem: &SslProblem) -> Result<SslSolution> {
    let y = problem.label_vector();
    let sym = sym_laplacian(problem.space, problem.rho)?;
    let m = sym.nodes.len();

    let mut scores = y.clone();
    if m > 0 {
        let system = DMatrix::identity(m, m) + &sym.matrix * problem.tau;
        let y_restricted = DVector::from_iterator(m, sym.nodes.iter().map(|&j| y[j]));
        let f_restricted = Cholesky::new(system)
            .ok_or(Error::LinearSolveFailed)?
            .solve(&y_restricted);
        for (a, &j) in sym.nodes.iter().enumerate() {
            scores[j] = f_restricted[a];
        }
    }

    let predictions = scores
        .iter()
        .map(|&f| if f < 0.0 { -1 } else { 1 })
        .collect();
    let mut isolated = vec![true; problem.space.node_count()];
    for &j in &sym.nodes {
        isolated[j] = false;
    }
    let no_evidence = (0..problem.space.node_count())
        .filter(|&j| isolated[j] && !problem.labeled.contains_key(&j))
        .collect();
    let objective = objective(problem, &scores)?;
    Ok(SslSolution {
        scores,
        predictions,
        objective,
        no_evidence,
    })
}

/// Exact objective value `||Y - f||^2 + tau * f^T L_sym f` (the regularizer
/// sums each edge once). Used as the oracle when testing `solve`.
pub fn objective(problem: &SslProblem, f: &DVector<f64>) -> Result<f64> {
    let k = problem.space.node_count();
    if f.len() != k {
        return Err(Error::VectorLength {
            expected: k,
            found: f.len(),
        });
    }
    let y = problem.label_vector();
    let fidelity = (&y - f).norm_squared();
    let graph = AuxiliaryGraph::build(problem.space, problem.rho)?;
    let mut reg = 0.0;
    for i in 0..k {
        for j in (i + 1)..k {
            let w = graph.weights[(i, j)];
            if w > 0.0 {
                let gi = f[i] / graph.degrees[i].sqrt();
                let gj = f[j] / graph.degrees[j].sqrt();
                reg += w * (gi - gj) * (gi - gj);
            }
        }
    }
    Ok(fidelity + problem.tau * reg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn barbell() -> MmSpace {
        // two 3-cliques at internal distance 1, far apart from each other
        let mut dist = DMatrix::from_element(6, 6, 10.0);
        for i in 0..6 {
            dist[(i, i)] = 0.0;
        }
        for group in [[0usize, 1, 2], [3, 4, 5]] {
            for &a in &group {
                for &b in &group {
                    if a != b {
                        dist[(a, b)] = 1.0;
                    }
                }
            }
        }
        MmSpace::new(dist, DVector::from_element(6, 1.0 / 6.0)).unwrap()
    }

    fn seeds() -> BTreeMap<usize, i8> {
        BTreeMap::from([(0, 1), (3, -1)])
    }

    #[test]
    fn vanishing_tau_returns_labels() {
        let s = barbell();
        let problem = SslProblem::new(&s, 1.5, 1e-12, seeds()).unwrap();
        let sol = solve(&problem).unwrap();
        let y = problem.label_vector();
        for j in 0..6 {
            assert!((sol.scores[j] - y[j]).abs() < 1e-8);
        }
    }

    #[test]
    fn barbell_recovery() {
        let s = barbell();
        let problem = SslProblem::new(&s, 1.5, 1.0, seeds()).unwrap();
        let sol = solve(&problem).unwrap();
        assert_eq!(sol.predictions, vec![1, 1, 1, -1, -1, -1]);
        // closed form per clique: seed 3/5, neighbours 1/5 each
        let expected = [0.6, 0.2, 0.2, -0.6, -0.2, -0.2];
        for (got, want) in sol.scores.iter().zip(expected) {
            assert!((got - want).abs() < 1e-10, "{got} vs {want}");
        }
        assert!(sol.no_evidence.is_empty());
    }

    #[test]
    fn solution_beats_reference_points() {
        let s = barbell();
        let problem = SslProblem::new(&s, 1.5, 0.7, seeds()).unwrap();
        let sol = solve(&problem).unwrap();
        let zero = DVector::zeros(6);
        let y = problem.label_vector();
        assert!(sol.objective <= objective(&problem, &zero).unwrap());
        assert!(sol.objective <= objective(&problem, &y).unwrap());
    }

    #[test]
    fn randomized_optimality() {
        let s = barbell();
        let problem = SslProblem::new(&s, 1.5, 0.7, seeds()).unwrap();
        let sol = solve(&problem).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let eps = 10f64.powf(rng.random_range(-4.0..0.0));
            let noise = DVector::from_fn(6, |_, _| rng.random_range(-1.0..1.0)) * eps;
            let perturbed = &sol.scores + noise;
            assert!(sol.objective <= objective(&problem, &perturbed).unwrap() + 1e-12);
        }
    }

    #[test]
    fn single_seed_connected_graph_keeps_sign() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let k = rng.random_range(2..=10);
            let coords = DMatrix::from_fn(k, 2, |_, _| rng.random_range(0.0..1.0));
            let s = MmSpace::from_points(&coords, &crate::mmspace::MassPolicy::uniform()).unwrap();
            // rho = 2 > diameter of the unit square, so connected
            let problem = SslProblem::new(&s, 2.0, 1.0, BTreeMap::from([(0, 1)])).unwrap();
            let sol = solve(&problem).unwrap();
            assert!(sol.scores.iter().all(|&f| f > 0.0));
        }
    }

    #[test]
    fn objective_reference_values() {
        // no edges: f = Y on the labelled nodes, 0 elsewhere, objective 0
        let s = barbell();
        let problem = SslProblem::new(&s, 0.5, 1.0, seeds()).unwrap();
        let y = problem.label_vector();
        assert_eq!(objective(&problem, &y).unwrap(), 0.0);
        // f = 0: objective is the number of labelled nodes
        let zero = DVector::zeros(6);
        assert_eq!(objective(&problem, &zero).unwrap(), 2.0);
    }

    #[test]
    fn isolated_nodes_keep_labels_and_are_flagged() {
        let s = barbell();
        // rho below the minimum distance: everything is isolated
        let problem = SslProblem::new(&s, 0.5, 1.0, seeds()).unwrap();
        let sol = solve(&problem).unwrap();
        assert_eq!(sol.scores[0], 1.0);
        assert_eq!(sol.scores[3], -1.0);
        assert_eq!(sol.scores[1], 0.0);
        assert_eq!(sol.predictions[1], 1); // tie rule: zero goes to +1
        assert_eq!(sol.no_evidence, vec![1, 2, 4, 5]);
    }

    #[test]
    fn label_flip_negates_scores() {
        let s = barbell();
        let problem = SslProblem::new(&s, 1.5, 0.9, seeds()).unwrap();
        let flipped: BTreeMap<usize, i8> = seeds().into_iter().map(|(i, v)| (i, -v)).collect();
        let problem_neg = SslProblem::new(&s, 1.5, 0.9, flipped).unwrap();
        let (a, b) = (solve(&problem).unwrap(), solve(&problem_neg).unwrap());
        for j in 0..6 {
            assert_eq!(a.scores[j], -b.scores[j]);
        }
    }

    #[test]
    fn mass_scaling_leaves_scores_unchanged() {
        let s = barbell();
        let scaled = MmSpace::new(s.dist().clone(), s.mass() * 7.3).unwrap();
        let p1 = SslProblem::new(&s, 1.5, 0.9, seeds()).unwrap();
        let p2 = SslProblem::new(&scaled, 1.5, 0.9, seeds()).unwrap();
        let (a, b) = (solve(&p1).unwrap(), solve(&p2).unwrap());
        for j in 0..6 {
            assert!((a.scores[j] - b.scores[j]).abs() < 1e-10);
        }
    }

    #[test]
    fn gradient_check() {
        let s = barbell();
        let problem = SslProblem::new(&s, 1.5, 0.7, seeds()).unwrap();
        let sol = solve(&problem).unwrap();
        // analytic optimality: 2(f - Y) + 2 tau L_sym f = 0 on non-isolated
        let y = problem.label_vector();
        let sym = sym_laplacian(&s, 1.5).unwrap();
        let f_r = DVector::from_iterator(
            sym.nodes.len(),
            sym.nodes.iter().map(|&j| sol.scores[j]),
        );
        let y_r = DVector::from_iterator(sym.nodes.len(), sym.nodes.iter().map(|&j| y[j]));
        let grad = (&f_r - &y_r) * 2.0 + &sym.matrix * &f_r * 2.0 * problem.tau;
        assert!(grad.abs().max() < 1e-8);

        // finite differences of the objective agree with the analytic form
        let h = 1e-6;
        let at = DVector::from_fn(6, |i, _| 0.1 * i as f64 - 0.2);
        for j in 0..6 {
            let mut up = at.clone();
            let mut down = at.clone();
            up[j] += h;
            down[j] -= h;
            let fd = (objective(&problem, &up).unwrap() - objective(&problem, &down).unwrap())
                / (2.0 * h);
            let a = sym.nodes.iter().position(|&n| n == j);
            let analytic = match a {
                Some(a) => {
                    let f_r = DVector::from_iterator(
                        sym.nodes.len(),
                        sym.nodes.iter().map(|&n| at[n]),
                    );
                    2.0 * (at[j] - y[j]) + 2.0 * problem.tau * (sym.matrix.row(a) * &f_r)[0]
                }
                None => 2.0 * (at[j] - y[j]),
            };
            assert!((fd - analytic).abs() < 1e-5, "{fd} vs {analytic}");
        }
    }

    #[test]
    fn problem_validation() {
        let s = barbell();
        assert!(matches!(
            SslProblem::new(&s, 1.5, 0.0, seeds()),
            Err(Error::NonPositiveTau(_))
        ));
        assert!(matches!(
            SslProblem::new(&s, 1.5, 1.0, BTreeMap::new()),
            Err(Error::NoLabels)
        ));
        assert!(matches!(
            SslProblem::new(&s, 1.5, 1.0, BTreeMap::from([(9, 1)])),
            Err(Error::LabelOutOfRange { .. })
        ));
        assert!(matches!(
            SslProblem::new(&s, 1.5, 1.0, BTreeMap::from([(0, 2)])),
            Err(Error::InvalidLabel { .. })
        ));
    }
}
