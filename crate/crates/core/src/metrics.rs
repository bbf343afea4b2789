//! Partition-quality scores: modularity, normalized mutual information and
//! matched accuracy.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::graph::{CommunityAssignment, Graph, ModularityMatrix};

/// Largest community count accepted by [`accuracy`].
pub const MAX_MATCHING_COMMUNITIES: usize = 20;

fn check_coverage(graph: &Graph, assignment: &CommunityAssignment) -> Result<()> {
    if assignment.len() != graph.n_nodes() {
        return Err(Error::Coverage {
            expected: graph.n_nodes(),
            actual: assignment.len(),
        });
    }
    Ok(())
}

/// Modularity `Q` of `assignment` on `graph`.
///
/// Evaluated per community as `Σ_c [ L_c / M - (D_c / 2M)^2 ]`, where `L_c`
/// counts intra-community edges and `D_c` sums degrees, which is the same sum
/// as `(1/2M) Σ_ij b_ij δ(σ_i, σ_j)` grouped by community.
pub fn modularity_score(graph: &Graph, assignment: &CommunityAssignment) -> Result<f64> {
    check_coverage(graph, assignment)?;
    if graph.n_edges() == 0 {
        return Err(Error::EmptyGraph);
    }
    let labels = assignment.labels();
    let mut internal = vec![0usize; assignment.k()];
    let mut degree_sum = vec![0usize; assignment.k()];
    for (v, &c) in labels.iter().enumerate() {
        degree_sum[c] += graph.degree(v);
    }
    for &(u, v) in graph.edges() {
        if labels[u] == labels[v] {
            internal[labels[u]] += 1;
        }
    }
    let m = graph.n_edges() as f64;
    Ok(internal
        .iter()
        .zip(&degree_sum)
        .map(|(&l, &d)| l as f64 / m - (d as f64 / (2.0 * m)).powi(2))
        .sum())
}

/// `Q = (1/2M) Σ_{i,j} (a_ij - k_i k_j / 2M) δ(σ_i, σ_j)` by direct double
/// loop over all node pairs.
pub fn modularity_double_loop(graph: &Graph, assignment: &CommunityAssignment) -> Result<f64> {
    check_coverage(graph, assignment)?;
    if graph.n_edges() == 0 {
        return Err(Error::EmptyGraph);
    }
    let n = graph.n_nodes();
    let two_m = 2.0 * graph.n_edges() as f64;
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            if assignment.same_community(i, j) {
                let a = if graph.has_edge(i, j) { 1.0 } else { 0.0 };
                total += a - (graph.degree(i) * graph.degree(j)) as f64 / two_m;
            }
        }
    }
    Ok(total / two_m)
}

/// `Q = Tr(Hᵀ B H) / 2M` with one-hot membership rows `H`.
pub fn modularity_trace_form(
    b: &ModularityMatrix,
    n_edges: usize,
    assignment: &CommunityAssignment,
) -> Result<f64> {
    if assignment.len() != b.n() {
        return Err(Error::Coverage {
            expected: b.n(),
            actual: assignment.len(),
        });
    }
    let mut h = Array2::<f64>::zeros((b.n(), assignment.k()));
    for (i, &c) in assignment.labels().iter().enumerate() {
        h[[i, c]] = 1.0;
    }
    let hbh = h.t().dot(&b.values.dot(&h));
    Ok(hbh.diag().sum() / (2.0 * n_edges as f64))
}

fn contingency(a: &[usize], b: &[usize]) -> (Array2<f64>, Vec<f64>, Vec<f64>) {
    let ka = a.iter().max().map_or(0, |m| m + 1);
    let kb = b.iter().max().map_or(0, |m| m + 1);
    let mut table = Array2::zeros((ka, kb));
    for (&x, &y) in a.iter().zip(b) {
        table[[x, y]] += 1.0;
    }
    let rows = table.rows().into_iter().map(|r| r.sum()).collect();
    let cols = table.columns().into_iter().map(|c| c.sum()).collect();
    (table, rows, cols)
}

fn entropy(counts: &[f64], n: f64) -> f64 {
    counts
        .iter()
        .filter(|&&c| c > 0.0)
        .map(|&c| {
            let p = c / n;
            -p * p.ln()
        })
        .sum()
}

/// Normalized mutual information, `I(a; b) / ((H(a) + H(b)) / 2)`.
///
/// When both partitions have zero entropy the result is 1 if they are the
/// same partition and 0 otherwise.
pub fn nmi(a: &CommunityAssignment, b: &CommunityAssignment) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Coverage {
            expected: a.len(),
            actual: b.len(),
        });
    }
    let n = a.len() as f64;
    if a.is_empty() {
        return Ok(1.0);
    }
    let (table, rows, cols) = contingency(a.labels(), b.labels());
    let (ha, hb) = (entropy(&rows, n), entropy(&cols, n));
    if ha == 0.0 && hb == 0.0 {
        return Ok(1.0);
    }
    let mut mi = 0.0;
    for ((i, j), &nij) in table.indexed_iter() {
        if nij > 0.0 {
            mi += nij / n * (n * nij / (rows[i] * cols[j])).ln();
        }
    }
    Ok((mi / ((ha + hb) / 2.0)).clamp(0.0, 1.0))
}

/// Fraction of nodes labelled consistently with `truth` under the best
/// one-to-one relabelling of `a`'s communities.
pub fn accuracy(a: &CommunityAssignment, truth: &CommunityAssignment) -> Result<f64> {
    if a.len() != truth.len() {
        return Err(Error::Coverage {
            expected: truth.len(),
            actual: a.len(),
        });
    }
    let k = a.k().max(truth.k());
    if k > MAX_MATCHING_COMMUNITIES {
        return Err(Error::TooManyCommunities {
            limit: MAX_MATCHING_COMMUNITIES,
            actual: k,
        });
    }
    if a.is_empty() {
        return Ok(1.0);
    }
    let mut confusion = Array2::<f64>::zeros((k, k));
    for (&x, &y) in a.labels().iter().zip(truth.labels()) {
        confusion[[x, y]] += 1.0;
    }
    let cost = confusion.mapv(|c| -c);
    let matching = hungarian(&cost);
    let matched: f64 = matching
        .iter()
        .enumerate()
        .map(|(row, &col)| confusion[[row, col]])
        .sum();
    Ok(matched / a.len() as f64)
}

/// Minimum-cost perfect matching on a square cost matrix (Kuhn–Munkres with
/// potentials). Returns the column assigned to each row.
pub(crate) fn hungarian(cost: &Array2<f64>) -> Vec<usize> {
    let n = cost.nrows();
    debug_assert_eq!(n, cost.ncols());
    // 1-based arrays; index 0 is the virtual root
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[[i0 - 1, j - 1]] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0; n];
    for j in 1..=n {
        if p[j] != 0 {
            assignment[p[j] - 1] = j - 1;
        }
    }
    assignment
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::modularity_matrix;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn two_triangles() -> Graph {
        Graph::from_edges(6, [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)])
    }

    fn assign(labels: &[usize]) -> CommunityAssignment {
        CommunityAssignment::from_labels(labels.to_vec())
    }

    #[test]
    fn single_community_scores_zero() {
        let g = two_triangles();
        let one = assign(&[0; 6]);
        assert_eq!(modularity_score(&g, &one).unwrap(), 0.0);
        assert!(modularity_double_loop(&g, &one).unwrap().abs() < 1e-12);
    }

    #[test]
    fn two_triangles_natural_split() {
        // each triangle: 3 internal edges of 6, degree share 1/2
        // Q = 2 * (3/6 - (6/12)^2) = 0.5
        let g = two_triangles();
        let split = assign(&[0, 0, 0, 1, 1, 1]);
        let oracle = modularity_double_loop(&g, &split).unwrap();
        assert!((oracle - 0.5).abs() < 1e-12);
        assert!((modularity_score(&g, &split).unwrap() - oracle).abs() < 1e-12);
    }

    #[test]
    fn coverage_mismatch_is_rejected() {
        let g = two_triangles();
        assert!(matches!(
            modularity_score(&g, &assign(&[0, 1])),
            Err(Error::Coverage { .. })
        ));
    }

    #[test]
    fn nmi_edge_cases() {
        let a = assign(&[0, 0, 1, 1, 2, 2]);
        assert!((nmi(&a, &a).unwrap() - 1.0).abs() < 1e-12);
        let relabeled = assign(&[2, 2, 0, 0, 1, 1]);
        assert!((nmi(&a, &relabeled).unwrap() - 1.0).abs() < 1e-12);
        let constant = assign(&[0; 4]);
        let balanced = assign(&[0, 0, 1, 1]);
        assert_eq!(nmi(&constant, &balanced).unwrap(), 0.0);
        assert_eq!(nmi(&constant, &constant).unwrap(), 1.0);
        assert!(nmi(&constant, &a).is_err());
    }

    /// Independent contingency-table evaluation with explicit probabilities.
    fn nmi_oracle(a: &[usize], b: &[usize]) -> f64 {
        let n = a.len() as f64;
        let ka = *a.iter().max().unwrap() + 1;
        let kb = *b.iter().max().unwrap() + 1;
        let mut joint = vec![vec![0.0; kb]; ka];
        for (&x, &y) in a.iter().zip(b) {
            joint[x][y] += 1.0 / n;
        }
        let pa: Vec<f64> = joint.iter().map(|r| r.iter().sum()).collect();
        let pb: Vec<f64> = (0..kb).map(|j| joint.iter().map(|r| r[j]).sum()).collect();
        let h = |p: &[f64]| -p.iter().filter(|&&x| x > 0.0).map(|&x| x * x.ln()).sum::<f64>();
        let mut mi = 0.0;
        for i in 0..ka {
            for j in 0..kb {
                if joint[i][j] > 0.0 {
                    mi += joint[i][j] * (joint[i][j] / (pa[i] * pb[j])).ln();
                }
            }
        }
        mi / ((h(&pa) + h(&pb)) / 2.0)
    }

    #[test]
    fn nmi_matches_contingency_oracle_on_random_partitions() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let a: Vec<usize> = (0..1000).map(|_| rng.gen_range(0..3)).collect();
        let b: Vec<usize> = (0..1000).map(|_| rng.gen_range(0..3)).collect();
        let got = nmi(&assign(&a), &assign(&b)).unwrap();
        assert!((got - nmi_oracle(&a, &b)).abs() < 1e-10);
    }

    fn permutations(items: Vec<usize>) -> Vec<Vec<usize>> {
        if items.len() <= 1 {
            return vec![items];
        }
        let mut out = Vec::new();
        for i in 0..items.len() {
            let mut rest = items.clone();
            let head = rest.remove(i);
            for mut tail in permutations(rest) {
                tail.insert(0, head);
                out.push(tail);
            }
        }
        out
    }

    fn accuracy_oracle(a: &[usize], truth: &[usize], k: usize) -> f64 {
        permutations((0..k).collect())
            .into_iter()
            .map(|perm| a.iter().zip(truth).filter(|(&x, &y)| perm[x] == y).count())
            .max()
            .unwrap() as f64
            / a.len() as f64
    }

    #[test]
    fn accuracy_examples() {
        let truth = assign(&[0, 0, 0, 0, 0, 1, 1, 1, 1, 1]);
        assert_eq!(accuracy(&truth, &truth).unwrap(), 1.0);
        let flipped = assign(&[1, 1, 1, 1, 1, 0, 0, 0, 0, 0]);
        assert_eq!(accuracy(&flipped, &truth).unwrap(), 1.0);
        let one_off = [1, 1, 1, 1, 0, 0, 0, 0, 0, 0];
        let expected = accuracy_oracle(&one_off, truth.labels(), 2);
        assert!((expected - 0.9).abs() < 1e-15);
        assert_eq!(accuracy(&assign(&one_off), &truth).unwrap(), expected);
        let many = assign(&(0..21).collect::<Vec<_>>());
        assert!(matches!(
            accuracy(&many, &many),
            Err(Error::TooManyCommunities { .. })
        ));
    }

    proptest! {
        #[test]
        fn accuracy_matches_exhaustive_matching(
            k in 1usize..5,
            raw in prop::collection::vec((0usize..5, 0usize..5), 1..40),
        ) {
            let a: Vec<usize> = raw.iter().map(|&(x, _)| x % k).collect();
            let t: Vec<usize> = raw.iter().map(|&(_, y)| y % k).collect();
            let a_asg = CommunityAssignment::new(a.clone(), k).unwrap();
            let t_asg = CommunityAssignment::new(t.clone(), k).unwrap();
            let got = accuracy(&a_asg, &t_asg).unwrap();
            prop_assert!((got - accuracy_oracle(&a, &t, k)).abs() < 1e-12);
        }

        #[test]
        fn nmi_is_symmetric_and_bounded(
            raw in prop::collection::vec((0usize..4, 0usize..4), 2..60),
        ) {
            let a = assign(&raw.iter().map(|p| p.0).collect::<Vec<_>>());
            let b = assign(&raw.iter().map(|p| p.1).collect::<Vec<_>>());
            let ab = nmi(&a, &b).unwrap();
            let ba = nmi(&b, &a).unwrap();
            prop_assert!((ab - ba).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&ab));
            prop_assert!((nmi(&a, &a).unwrap() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn modularity_formulas_agree_and_are_permutation_invariant(
            n in 2usize..30,
            raw_edges in prop::collection::vec((0usize..30, 0usize..30), 1..80),
            raw_labels in prop::collection::vec(0usize..4, 30),
            seed in any::<u64>(),
        ) {
            let edges: Vec<_> = raw_edges.iter().map(|&(u, v)| (u % n, v % n)).collect();
            let g = Graph::from_edges(n, edges);
            prop_assume!(g.n_edges() > 0);
            let labels = assign(&raw_labels[..n]);
            let fast = modularity_score(&g, &labels).unwrap();
            let brute = modularity_double_loop(&g, &labels).unwrap();
            let b = modularity_matrix(&g).unwrap();
            let trace = modularity_trace_form(&b, g.n_edges(), &labels).unwrap();
            prop_assert!((fast - brute).abs() < 1e-12);
            prop_assert!((trace - brute).abs() < 1e-12);

            let mut perm: Vec<usize> = (0..n).collect();
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            rand::seq::SliceRandom::shuffle(perm.as_mut_slice(), &mut rng);
            let pg = g.permuted(&perm);
            let mut plabels = vec![0; n];
            for i in 0..n {
                plabels[perm[i]] = labels.labels()[i];
            }
            let permuted_q = modularity_score(&pg, &assign(&plabels)).unwrap();
            prop_assert!((permuted_q - fast).abs() < 1e-12);
        }
    }
}
