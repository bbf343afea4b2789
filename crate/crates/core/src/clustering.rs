//! K-means with k-means++ seeding and restarts, nearest-centroid assignment
//! and K sweeps scored by modularity.

use std::ops::RangeInclusive;

use ndarray::{Array2, ArrayView1, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{CommunityAssignment, Graph};
use crate::metrics::modularity_score;
use crate::rng;
use crate::Matrix;

pub const DEFAULT_RESTARTS: usize = 10;
pub const MAX_LLOYD_ITERATIONS: usize = 300;
pub const CONVERGENCE_SHIFT: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    pub centroids: Matrix,
    pub labels: Vec<usize>,
    pub inertia: f64,
    /// Inertia after every assignment step of the winning restart.
    pub inertia_trace: Vec<f64>,
    pub restart: usize,
}

impl KMeansResult {
    pub fn to_assignment(&self) -> CommunityAssignment {
        CommunityAssignment::new(self.labels.clone(), self.centroids.nrows())
            .and_then(|a| a.with_centroids(self.centroids.clone()))
            .expect("labels and centroids are consistent by construction")
    }
}

fn squared_distance(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Index of the nearest centroid; ties go to the lowest index.
pub fn assign_nearest(centroids: &Matrix, z: ArrayView1<f64>) -> usize {
    let mut best = 0;
    let mut best_dist = f64::INFINITY;
    for (c, row) in centroids.outer_iter().enumerate() {
        let d = squared_distance(row, z);
        if d < best_dist {
            best_dist = d;
            best = c;
        }
    }
    best
}

fn assign_all(z: &Matrix, centroids: &Matrix, labels: &mut [usize], dists: &mut [f64]) -> f64 {
    let mut inertia = 0.0;
    for (i, row) in z.outer_iter().enumerate() {
        let c = assign_nearest(centroids, row);
        labels[i] = c;
        dists[i] = squared_distance(centroids.row(c), row);
        inertia += dists[i];
    }
    inertia
}

fn seed_plus_plus(z: &Matrix, k: usize, rng: &mut rng::Rng) -> Matrix {
    let n = z.nrows();
    let mut centroids = Array2::zeros((k, z.ncols()));
    centroids.row_mut(0).assign(&z.row(rng.gen_range(0..n)));
    let mut dist: Vec<f64> = z
        .outer_iter()
        .map(|row| squared_distance(row, centroids.row(0)))
        .collect();
    for c in 1..k {
        let total: f64 = dist.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.gen::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &d) in dist.iter().enumerate() {
                if target < d {
                    chosen = i;
                    break;
                }
                target -= d;
            }
            chosen
        } else {
            rng.gen_range(0..n)
        };
        centroids.row_mut(c).assign(&z.row(pick));
        for (i, row) in z.outer_iter().enumerate() {
            dist[i] = dist[i].min(squared_distance(row, centroids.row(c)));
        }
    }
    centroids
}

fn lloyd(z: &Matrix, mut centroids: Matrix) -> KMeansResult {
    let (n, k) = (z.nrows(), centroids.nrows());
    let mut labels = vec![0; n];
    let mut dists = vec![0.0; n];
    let mut trace = Vec::new();
    for _ in 0..MAX_LLOYD_ITERATIONS {
        trace.push(assign_all(z, &centroids, &mut labels, &mut dists));

        let mut sums = Array2::<f64>::zeros(centroids.raw_dim());
        let mut counts = vec![0usize; k];
        for (i, row) in z.outer_iter().enumerate() {
            sums.row_mut(labels[i]).scaled_add(1.0, &row);
            counts[labels[i]] += 1;
        }
        let mut updated = centroids.clone();
        for c in 0..k {
            if counts[c] > 0 {
                let mean = &sums.row(c) / counts[c] as f64;
                updated.row_mut(c).assign(&mean);
            }
        }
        for c in 0..k {
            if counts[c] == 0 {
                let far = (0..n)
                    .max_by(|&a, &b| dists[a].total_cmp(&dists[b]).then(b.cmp(&a)))
                    .expect("non-empty input");
                updated.row_mut(c).assign(&z.row(far));
                dists[far] = 0.0;
            }
        }
        let shift = (&updated - &centroids)
            .mapv(|x| x * x)
            .sum_axis(Axis(1))
            .iter()
            .fold(0.0f64, |m, &s| m.max(s.sqrt()));
        centroids = updated;
        if shift < CONVERGENCE_SHIFT {
            break;
        }
    }
    let inertia = assign_all(z, &centroids, &mut labels, &mut dists);
    trace.push(inertia);
    KMeansResult { centroids, labels, inertia, inertia_trace: trace, restart: 0 }
}

/// Best-inertia K-means over `restarts` k-means++ initializations; restart
/// `r` draws from seed `seed + r`.
pub fn kmeans_fit(z: &Matrix, k: usize, restarts: usize, seed: u64) -> Result<KMeansResult> {
    if z.nrows() == 0 {
        return Err(Error::Config("k-means on an empty embedding".into()));
    }
    if k == 0 || k > z.nrows() {
        return Err(Error::Config(format!("k = {k} must lie in 1..={}", z.nrows())));
    }
    if restarts == 0 {
        return Err(Error::Config("at least one k-means restart required".into()));
    }
    let mut best: Option<KMeansResult> = None;
    for r in 0..restarts {
        let mut rng = rng::stream(seed.wrapping_add(r as u64), "kmeans", 0);
        let mut result = lloyd(z, seed_plus_plus(z, k, &mut rng));
        result.restart = r;
        if best.as_ref().is_none_or(|b| result.inertia < b.inertia) {
            best = Some(result);
        }
    }
    Ok(best.expect("restarts >= 1"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub k: usize,
    pub q: f64,
    pub inertia: f64,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub best_k: usize,
    pub best: KMeansResult,
    pub table: Vec<SweepRow>,
}

impl SweepResult {
    pub fn best_q(&self) -> f64 {
        self.table.iter().find(|r| r.k == self.best_k).map_or(f64::NAN, |r| r.q)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,q,inertia\n");
        for row in &self.table {
            out.push_str(&format!("{},{},{}\n", row.k, row.q, row.inertia));
        }
        out
    }
}

/// Runs [`kmeans_fit`] for every `k` in the range and keeps the highest-Q
/// clustering (earliest `k` on ties).
pub fn sweep_k(
    z: &Matrix,
    graph: &Graph,
    k_range: RangeInclusive<usize>,
    restarts: usize,
    seed: u64,
) -> Result<SweepResult> {
    if k_range.is_empty() {
        return Err(Error::Config("empty k range".into()));
    }
    if *k_range.start() < 2 || *k_range.end() >= graph.n_nodes() {
        return Err(Error::Config(format!(
            "k range {}..={} must lie within 2..={}",
            k_range.start(),
            k_range.end(),
            graph.n_nodes().saturating_sub(1)
        )));
    }
    let mut table = Vec::new();
    let mut best: Option<(f64, usize, KMeansResult)> = None;
    for k in k_range {
        let fit = kmeans_fit(z, k, restarts, seed)?;
        let q = modularity_score(graph, &fit.to_assignment())?;
        table.push(SweepRow { k, q, inertia: fit.inertia });
        if best.as_ref().is_none_or(|(bq, _, _)| q > *bq) {
            best = Some((q, k, fit));
        }
    }
    let (_, best_k, best) = best.expect("non-empty range");
    Ok(SweepResult { best_k, best, table })
}
