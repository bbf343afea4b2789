//! Inference for nodes that arrive after training: feature alignment,
//! peer-aware self-attention over sampled neighbors, and nearest-centroid
//! community assignment.
//!
//! A new node has no modularity row of its own. Alignment borrows the row of
//! the sampled neighbor whose own neighbor sample overlaps most with the new
//! node's sample.

use std::collections::HashSet;

use ndarray::{s, Array1, Array2, Axis};

use crate::clustering::assign_nearest;
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::rng;
use crate::twostage::{sample_neighbors, Block, FirstLayer, NeighborSample, TwoStageModel};
use crate::Matrix;

#[derive(Debug, Clone, PartialEq)]
pub struct NewNode {
    pub raw_features: Option<Array1<f64>>,
    pub edge_stubs: Vec<usize>,
}

impl NewNode {
    pub fn new(edge_stubs: Vec<usize>) -> Self {
        Self { raw_features: None, edge_stubs }
    }

    pub fn with_features(mut self, x: Array1<f64>) -> Self {
        self.raw_features = Some(x);
        self
    }

    pub fn validate(&self, base: &Graph) -> Result<()> {
        if self.edge_stubs.is_empty() {
            return Err(Error::NewNode("new node has no edge stubs".into()));
        }
        if let Some(&bad) = self.edge_stubs.iter().find(|&&u| u >= base.n_nodes()) {
            return Err(Error::NewNode(format!(
                "stub {bad} out of range for a {}-node graph",
                base.n_nodes()
            )));
        }
        let f = base.feature_dim();
        match &self.raw_features {
            Some(x) if x.len() != f => Err(Error::NewNode(format!("{} features, expected {f}", x.len()))),
            None if f > 0 => Err(Error::NewNode(format!("missing {f} features"))),
            _ => Ok(()),
        }
    }

    /// `k` stubs drawn with the same rule as neighbor sampling.
    pub fn sample_stubs(&self, k: usize, rng: &mut rng::Rng) -> Vec<usize> {
        let mut stubs = self.edge_stubs.clone();
        stubs.sort_unstable();
        stubs.dedup();
        let star = Graph::from_edges(stubs.len() + 1, (0..stubs.len()).map(|i| (stubs.len(), i)));
        sample_neighbors(&star, stubs.len(), k, rng)
            .sampled
            .into_iter()
            .map(|i| stubs[i])
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttentionWeights {
    pub alpha: Matrix,
    pub scale: f64,
}

/// Row-softmax of `gram / sqrt(d)`.
pub fn attention_from_gram(gram: &Matrix, d: usize) -> Result<AttentionWeights> {
    if gram.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite { context: "attention scores", epoch: 0 });
    }
    let scale = 1.0 / (d as f64).sqrt();
    let mut alpha = gram * scale;
    for mut row in alpha.rows_mut() {
        let max = row.fold(f64::NEG_INFINITY, |m, &x| m.max(x));
        row.mapv_inplace(|x| (x - max).exp());
        let sum = row.sum();
        row /= sum;
    }
    Ok(AttentionWeights { alpha, scale })
}

pub fn attention_weights(neighbor_rows: &Matrix) -> Result<AttentionWeights> {
    if neighbor_rows.nrows() == 0 || neighbor_rows.ncols() == 0 {
        return Err(Error::Config("attention over an empty neighbor set".into()));
    }
    attention_from_gram(&neighbor_rows.dot(&neighbor_rows.t()), neighbor_rows.ncols())
}

/// Output row `i` is `Σ_j α_ij b_j`.
pub fn peer_attention(neighbor_rows: &Matrix) -> Result<Matrix> {
    if neighbor_rows.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite { context: "attention input", epoch: 0 });
    }
    Ok(attention_weights(neighbor_rows)?.alpha.dot(neighbor_rows))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alignment {
    /// Stubs sampled for the new node.
    pub sample: Vec<usize>,
    /// Existing node whose modularity row stands in for the new node's.
    pub curr: usize,
    pub overlap: usize,
}

/// Picks the sampled neighbor whose own `k`-sample shares the most members
/// with the new node's sample; ties keep the earliest candidate.
pub fn align_features(base: &Graph, node: &NewNode, k: usize, rng: &mut rng::Rng) -> Result<Alignment> {
    node.validate(base)?;
    let sample = node.sample_stubs(k, rng);
    let members: HashSet<usize> = sample.iter().copied().collect();
    let mut curr = sample[0];
    let mut best = 0;
    for &j in &sample {
        let theirs: HashSet<usize> = sample_neighbors(base, j, k, rng).sampled.into_iter().collect();
        let overlap = theirs.intersection(&members).count();
        if overlap > best {
            best = overlap;
            curr = j;
        }
    }
    Ok(Alignment { sample, curr, overlap: best })
}

/// Dense aligned input `[b_curr, x_new]`.
pub fn aligned_input(base: &Graph, alignment: &Alignment, node: &NewNode) -> Array1<f64> {
    let mut row = base.modularity_row(alignment.curr);
    if let Some(x) = &node.raw_features {
        row.extend(x.iter());
    }
    Array1::from(row)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Inference {
    pub community: usize,
    pub embedding: Array1<f64>,
    pub alignment: Alignment,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    /// Recursive sample-and-aggregate.
    Plain,
    /// Peer attention applied to the neighbor rows of every first-layer
    /// encoding.
    Attention,
}

#[derive(Clone, Copy)]
enum Target {
    New,
    Existing(usize),
}

/// Read-only inference state over a trained model, its base graph and the
/// fitted centroids.
pub struct InferenceEngine<'a> {
    model: &'a TwoStageModel,
    base: &'a Graph,
    centroids: &'a Matrix,
    first: FirstLayer<'a>,
    layers: usize,
    k: usize,
    degree_sum: Vec<f64>,
    two_m: f64,
    degree_sq_sum: f64,
}

impl<'a> InferenceEngine<'a> {
    /// Uses the first `layers` layers of `model`; centroids must live in the
    /// output space of that layer.
    pub fn new(
        model: &'a TwoStageModel,
        base: &'a Graph,
        centroids: Option<&'a Matrix>,
        layers: usize,
    ) -> Result<Self> {
        let centroids = centroids.ok_or(Error::MissingCentroids)?;
        if layers == 0 || layers > model.layers() {
            return Err(Error::Config(format!("{layers} inference layers from a {}-layer model", model.layers())));
        }
        if base.n_nodes() != model.n_base || base.feature_dim() != model.feature_dim {
            return Err(Error::shape("inference base graph", model.n_base, base.n_nodes()));
        }
        let out = model.weights[layers - 1].out_dim();
        if centroids.ncols() != out || centroids.nrows() == 0 {
            return Err(Error::shape("centroids", format!("K x {out}"), format!("{:?}", centroids.dim())));
        }
        let degrees = base.degrees();
        let degree_sum = (0..base.n_nodes())
            .map(|v| base.neighbors(v).iter().map(|&u| degrees[u] as f64).sum())
            .collect();
        Ok(Self {
            model,
            base,
            centroids,
            first: FirstLayer::new(base, &model.weights[0].w),
            layers,
            k: model.config.neighbor_samples,
            degree_sum,
            two_m: 2.0 * base.n_edges() as f64,
            degree_sq_sum: degrees.iter().map(|&d| (d * d) as f64).sum(),
        })
    }

    /// `⟨b_i, b_j⟩ + ⟨x_i, x_j⟩` from adjacency alone.
    fn input_dot(&self, i: usize, j: usize) -> f64 {
        let (a, b) = (self.base.neighbors(i), self.base.neighbors(j));
        let (mut p, mut q, mut common) = (0, 0, 0usize);
        while p < a.len() && q < b.len() {
            match a[p].cmp(&b[q]) {
                std::cmp::Ordering::Less => p += 1,
                std::cmp::Ordering::Greater => q += 1,
                std::cmp::Ordering::Equal => {
                    common += 1;
                    p += 1;
                    q += 1;
                }
            }
        }
        let (ki, kj) = (a.len() as f64, b.len() as f64);
        let mut dot = common as f64 - kj / self.two_m * self.degree_sum[i] - ki / self.two_m * self.degree_sum[j]
            + ki * kj * self.degree_sq_sum / (self.two_m * self.two_m);
        if let Some(x) = self.base.features() {
            dot += x.row(i).dot(&x.row(j));
        }
        dot
    }

    fn input_dim(&self) -> usize {
        self.base.n_nodes() + self.base.feature_dim()
    }

    pub fn attention(&self, nodes: &[usize]) -> Result<AttentionWeights> {
        let gram = Array2::from_shape_fn((nodes.len(), nodes.len()), |(a, b)| self.input_dot(nodes[a], nodes[b]));
        attention_from_gram(&gram, self.input_dim())
    }

    fn sample(&self, target: Target, alignment: &Alignment, rng: &mut rng::Rng) -> Vec<usize> {
        let drawn = match target {
            Target::New => alignment.sample.clone(),
            Target::Existing(v) => sample_neighbors(self.base, v, self.k, rng).sampled,
        };
        NeighborSample { center: 0, sampled: drawn }.distinct()
    }

    fn own_projection(&self, target: Target, alignment: &Alignment, node: &NewNode) -> Array1<f64> {
        match target {
            Target::Existing(v) => self.first.project(v, Block::Own),
            Target::New => {
                let mut out = self.first.project_modularity(alignment.curr, Block::Own);
                if let Some(x) = &node.raw_features {
                    self.first.add_features(&mut out, x.view(), Block::Own);
                }
                out
            }
        }
    }

    fn encode(
        &self,
        target: Target,
        layer: usize,
        variant: Variant,
        alignment: &Alignment,
        node: &NewNode,
        rng: &mut rng::Rng,
    ) -> Result<Array1<f64>> {
        let nbrs = self.sample(target, alignment, rng);
        let inv = 1.0 / nbrs.len() as f64;
        if layer == 1 {
            let projected: Vec<Array1<f64>> =
                nbrs.iter().map(|&u| self.first.project(u, Block::Shared)).collect();
            // mean_j Σ_m α_jm (b_m W) equals Σ_m (mean_j α_jm) (b_m W)
            let coeff: Vec<f64> = match variant {
                Variant::Plain => vec![inv; nbrs.len()],
                Variant::Attention => {
                    let att = self.attention(&nbrs)?;
                    att.alpha.mean_axis(Axis(0)).expect("non-empty").to_vec()
                }
            };
            let mut pre = self.own_projection(target, alignment, node);
            for (c, p) in coeff.iter().zip(&projected) {
                pre.scaled_add(*c, p);
            }
            return Ok(pre.mapv_into(f64::tanh));
        }
        let own = self.encode(target, layer - 1, variant, alignment, node, rng)?;
        let mut shared = Array1::zeros(own.len());
        for &u in &nbrs {
            shared.scaled_add(inv, &self.encode(Target::Existing(u), layer - 1, variant, alignment, node, rng)?);
        }
        let w = &self.model.weights[layer - 1].w;
        let d = own.len();
        let pre = own.dot(&w.slice(s![..d, ..])) + shared.dot(&w.slice(s![d.., ..]));
        Ok(pre.mapv_into(f64::tanh))
    }

    pub fn infer(&self, node: &NewNode, variant: Variant, rng: &mut rng::Rng) -> Result<Inference> {
        let alignment = align_features(self.base, node, self.k, rng)?;
        let embedding = self.encode(Target::New, self.layers, variant, &alignment, node, rng)?;
        if embedding.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite { context: "inferred embedding", epoch: 0 });
        }
        let community = assign_nearest(self.centroids, embedding.view());
        Ok(Inference { community, embedding, alignment })
    }

    /// Embedding of an existing node through the same sampled recursion.
    pub fn embed_existing(&self, v: usize, variant: Variant, rng: &mut rng::Rng) -> Result<Array1<f64>> {
        let placeholder = Alignment { sample: vec![v], curr: v, overlap: 0 };
        let node = NewNode::new(vec![v]);
        self.encode(Target::Existing(v), self.layers, variant, &placeholder, &node, rng)
    }
}

/// One-layer inference with peer attention over the aligned neighbor rows.
pub fn infer_apam(
    model: &TwoStageModel,
    base: &Graph,
    centroids: Option<&Matrix>,
    node: &NewNode,
    rng: &mut rng::Rng,
) -> Result<Inference> {
    InferenceEngine::new(model, base, centroids, 1)?.infer(node, Variant::Attention, rng)
}

/// Recursive `layers`-hop sample-and-aggregate inference without attention.
pub fn infer_plain(
    model: &TwoStageModel,
    base: &Graph,
    centroids: Option<&Matrix>,
    node: &NewNode,
    layers: usize,
    rng: &mut rng::Rng,
) -> Result<Inference> {
    InferenceEngine::new(model, base, centroids, layers)?.infer(node, Variant::Plain, rng)
}

/// Dense reference for one first-layer attention encoding of a new node:
/// materializes every input row.
pub fn dense_apam_embedding(
    model: &TwoStageModel,
    base: &Graph,
    alignment: &Alignment,
    node: &NewNode,
) -> Result<Array1<f64>> {
    let dense_row = |v: usize| -> Array1<f64> {
        let mut row = base.modularity_row(v);
        if let Some(x) = base.features() {
            row.extend(x.row(v).iter());
        }
        Array1::from(row)
    };
    let nbrs = NeighborSample { center: 0, sampled: alignment.sample.clone() }.distinct();
    let d = base.n_nodes() + base.feature_dim();
    let mut rows = Array2::zeros((nbrs.len(), d));
    for (i, &u) in nbrs.iter().enumerate() {
        rows.row_mut(i).assign(&dense_row(u));
    }
    let attended = peer_attention(&rows)?;
    let shared = crate::twostage::neighborhood_sharing(attended.view())?;
    let own = aligned_input(base, alignment, node);
    crate::twostage::membership_encoding(own.view(), shared.view(), &model.weights[0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clustering::kmeans_fit;
    use crate::nn::TrainingConfig;
    use crate::twostage::train_twostage;
    use ndarray::array;
    use rand::{Rng, SeedableRng};

    fn two_triangles() -> Graph {
        Graph::from_edges(6, [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5), (2, 3)])
    }

    fn random_rows(k: usize, d: usize, seed: u64) -> Matrix {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        Array2::from_shape_simple_fn((k, d), || rng.gen_range(-2.0..2.0))
    }

    #[test]
    fn attention_examples() {
        let same = array![[0.3, 0.1, -0.4], [0.3, 0.1, -0.4], [0.3, 0.1, -0.4]];
        let att = attention_weights(&same).unwrap();
        assert!(att.alpha.iter().all(|&a| (a - 1.0 / 3.0).abs() < 1e-15));
        assert!((&peer_attention(&same).unwrap() - &same).iter().all(|d| d.abs() < 1e-15));
        let one = array![[1.5, -2.0]];
        assert_eq!(peer_attention(&one).unwrap(), one);
        assert!(peer_attention(&array![[f64::NAN]]).is_err());

        let b = random_rows(4, 3, 1);
        let got = peer_attention(&b).unwrap();
        for i in 0..4 {
            let scores: Vec<f64> = (0..4)
                .map(|j| (0..3).map(|c| b[[i, c]] * b[[j, c]]).sum::<f64>() / 3f64.sqrt())
                .collect();
            let total: f64 = scores.iter().map(|s| s.exp()).sum();
            for c in 0..3 {
                let oracle: f64 = (0..4).map(|j| scores[j].exp() / total * b[[j, c]]).sum();
                assert!((got[[i, c]] - oracle).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn alignment_examples() {
        // 0 and 1 share neighbors {2, 3}; node 4 shares nothing with the sample
        let g = Graph::from_edges(6, [(0, 2), (0, 3), (1, 2), (1, 3), (4, 5), (2, 5)]);
        let mut rng = rng::stream(0, "test", 0);
        let dup = NewNode::new(vec![2, 3]);
        let a = align_features(&g, &dup, 10, &mut rng).unwrap();
        assert_eq!(a.overlap, 0);
        assert_eq!(a.curr, a.sample[0]);

        let node = NewNode::new(vec![0, 1, 2]);
        let a = align_features(&g, &node, 10, &mut rng).unwrap();
        let oracle = a
            .sample
            .iter()
            .map(|&j| (g.neighbors(j).iter().filter(|u| node.edge_stubs.contains(u)).count(), j))
            .fold((0, a.sample[0]), |best, (o, j)| if o > best.0 { (o, j) } else { best });
        assert_eq!((a.overlap, a.curr), oracle);
        assert_eq!(a.curr, 2);
        assert!(align_features(&g, &NewNode::new(vec![]), 3, &mut rng).is_err());
        assert!(align_features(&g, &NewNode::new(vec![9]), 3, &mut rng).is_err());

        let again = align_features(&g, &node, 10, &mut rng::stream(5, "x", 0)).unwrap();
        let other = align_features(&g, &node, 10, &mut rng::stream(6, "x", 0)).unwrap();
        assert_eq!((again.curr, again.overlap), (other.curr, other.overlap));
    }

    fn trained(g: &Graph, layers: Vec<usize>) -> (TwoStageModel, Matrix) {
        let config = TrainingConfig {
            layer_dims: layers,
            neighbor_samples: 3,
            minibatch_size: 6,
            epochs: 150,
            ..Default::default()
        };
        let (model, z) = train_twostage(g, config).unwrap();
        let fit = kmeans_fit(&z, 2, 10, 0).unwrap();
        (model, fit.centroids)
    }

    #[test]
    fn factored_attention_matches_dense() {
        let g = Graph::from_edges(8, [(0, 1), (1, 2), (2, 3), (3, 0), (4, 5), (5, 6), (6, 7), (7, 4), (1, 5), (2, 6)]);
        for features in [false, true] {
            let g = if features {
                g.clone().with_features(random_rows(8, 2, 3).mapv(f64::abs)).unwrap()
            } else {
                g.clone()
            };
            let model = TwoStageModel::new(&g, TrainingConfig { layer_dims: vec![3], neighbor_samples: 3, ..Default::default() }).unwrap();
            let centroids = random_rows(2, 3, 4);
            let node = if features {
                NewNode::new(vec![1, 2, 6]).with_features(array![0.6, 0.8])
            } else {
                NewNode::new(vec![1, 2, 6])
            };
            let engine = InferenceEngine::new(&model, &g, Some(&centroids), 1).unwrap();
            let got = engine.infer(&node, Variant::Attention, &mut rng::stream(1, "t", 0)).unwrap();
            let dense = dense_apam_embedding(&model, &g, &got.alignment, &node).unwrap();
            assert!((&got.embedding - &dense).iter().all(|d| d.abs() < 1e-10), "{got:?} vs {dense}");
        }
    }

    #[test]
    fn new_nodes_follow_their_community() {
        let g = two_triangles();
        let (model, centroids) = trained(&g, vec![2]);
        let engine = InferenceEngine::new(&model, &g, Some(&centroids), 1).unwrap();
        let mut rng = rng::stream(2, "t", 0);
        let left = engine.infer(&NewNode::new(vec![0, 1]), Variant::Attention, &mut rng).unwrap();
        let right = engine.infer(&NewNode::new(vec![4, 5]), Variant::Attention, &mut rng).unwrap();
        let z0 = engine.embed_existing(0, Variant::Plain, &mut rng).unwrap();
        let z5 = engine.embed_existing(5, Variant::Plain, &mut rng).unwrap();
        assert_eq!(left.community, assign_nearest(&centroids, z0.view()));
        assert_eq!(right.community, assign_nearest(&centroids, z5.view()));
        assert_ne!(left.community, right.community);
    }

    #[test]
    fn copied_node_joins_the_original_community() {
        let mut edges = Vec::new();
        for block in [0, 4] {
            for i in 0..4 {
                for j in i + 1..4 {
                    edges.push((block + i, block + j));
                }
            }
        }
        edges.push((3, 4));
        let g = Graph::from_edges(8, edges);
        let (model, centroids) = trained(&g, vec![2]);
        let engine = InferenceEngine::new(&model, &g, Some(&centroids), 1).unwrap();
        let mut rng = rng::stream(4, "t", 0);
        for u in [1, 6] {
            let zu = engine.embed_existing(u, Variant::Plain, &mut rng).unwrap();
            let copy = NewNode::new(g.neighbors(u).to_vec());
            let plain = infer_plain(&model, &g, Some(&centroids), &copy, 1, &mut rng).unwrap();
            let att = infer_apam(&model, &g, Some(&centroids), &copy, &mut rng).unwrap();
            assert_eq!(plain.community, assign_nearest(&centroids, zu.view()));
            assert_eq!(att.community, plain.community);
        }
    }

    #[test]
    fn inference_errors() {
        let g = two_triangles();
        let model = TwoStageModel::new(&g, TrainingConfig { layer_dims: vec![2], ..Default::default() }).unwrap();
        let node = NewNode::new(vec![0]);
        let mut rng = rng::stream(0, "t", 0);
        assert!(matches!(infer_apam(&model, &g, None, &node, &mut rng), Err(Error::MissingCentroids)));
        let c = Array2::zeros((2, 2));
        assert!(infer_plain(&model, &g, Some(&c), &node, 2, &mut rng).is_err());
        assert!(infer_apam(&model, &g, Some(&c), &NewNode::new(vec![6]), &mut rng).is_err());
    }

    #[test]
    fn deeper_plain_inference_runs() {
        let g = two_triangles();
        let (model, _) = trained(&g, vec![3, 2]);
        let centroids = random_rows(2, 2, 9);
        let node = NewNode::new(vec![3, 4]);
        let before = (model.weights.clone(), centroids.clone());
        let two = infer_plain(&model, &g, Some(&centroids), &node, 2, &mut rng::stream(0, "t", 0)).unwrap();
        let att = InferenceEngine::new(&model, &g, Some(&centroids), 2)
            .unwrap()
            .infer(&node, Variant::Attention, &mut rng::stream(0, "t", 0))
            .unwrap();
        assert_eq!(two.embedding.len(), 2);
        assert!(att.embedding.iter().all(|x| x.abs() < 1.0));
        assert_eq!((model.weights.clone(), centroids), before);
    }
}
