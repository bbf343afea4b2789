//! Seeded planted-partition graphs for scaling and inference benchmarks.

use std::collections::HashSet;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedPartition {
    pub n_nodes: usize,
    pub communities: usize,
    pub average_degree: f64,
    /// Expected intra-community degree divided by inter-community degree.
    pub in_out_ratio: f64,
}

impl PlantedPartition {
    pub fn benchmark(n_nodes: usize) -> Self {
        Self { n_nodes, communities: 10, average_degree: 10.0, in_out_ratio: 4.0 }
    }

    /// Labelled graph with exactly the target number of intra and inter
    /// edges, communities assigned round-robin by node index.
    pub fn generate(&self, seed: u64) -> Result<Graph> {
        let (n, c) = (self.n_nodes, self.communities);
        if c < 2 || n < 2 * c {
            return Err(Error::Config(format!(
                "planted partition needs at least two nodes in each of >= 2 communities (n={n}, c={c})"
            )));
        }
        let total = (n as f64 * self.average_degree / 2.0).round() as usize;
        let intra = (total as f64 * self.in_out_ratio / (1.0 + self.in_out_ratio)).round() as usize;
        let inter = total - intra;
        let min_size = n / c;
        let intra_capacity = c * min_size * (min_size - 1) / 2;
        if intra > intra_capacity {
            return Err(Error::Config("average degree too high for the community sizes".into()));
        }

        let members: Vec<Vec<usize>> =
            (0..c).map(|b| (b..n).step_by(c).collect()).collect();
        let mut rng = rng::stream(seed, "planted-partition", n as u64);
        let mut seen = HashSet::with_capacity(total);
        let mut edges = Vec::with_capacity(total);
        let mut add = |u: usize, v: usize, edges: &mut Vec<(usize, usize)>| {
            let key = (u.min(v), u.max(v));
            if u != v && seen.insert(key) {
                edges.push(key);
                true
            } else {
                false
            }
        };
        let mut placed = 0;
        while placed < intra {
            let block = &members[rng.gen_range(0..c)];
            let u = block[rng.gen_range(0..block.len())];
            let v = block[rng.gen_range(0..block.len())];
            placed += usize::from(add(u, v, &mut edges));
        }
        placed = 0;
        while placed < inter {
            let a = rng.gen_range(0..c);
            let b = (a + rng.gen_range(1..c)) % c;
            let u = members[a][rng.gen_range(0..members[a].len())];
            let v = members[b][rng.gen_range(0..members[b].len())];
            placed += usize::from(add(u, v, &mut edges));
        }
        Graph::from_edges(n, edges).with_labels((0..n).map(|i| i % c).collect())
    }
}
