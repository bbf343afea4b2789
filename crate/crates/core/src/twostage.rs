//! Two-stage GAER: sampled neighborhood sharing (MEAN) followed by
//! concatenating membership encoding, trained on minibatch sub-blocks of the
//! modularity matrix.
//!
//! The first layer never materializes a modularity row: with
//! `b_v = a_v - (k_v / 2M) k`, the product `b_v · W` is the sum of the weight
//! rows of `v`'s neighbors minus `(k_v / 2M) kᵀW`.

use std::collections::HashMap;

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, ArrayViewMut1, Axis, Zip};
use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::nn::{
    adam_update, init_weights, reconstruction_loss_and_grad, LayerWeights, TrainingConfig, ADAM_BETA1,
    ADAM_BETA2, ADAM_EPSILON,
};
use crate::rng;
use crate::Matrix;

pub const MAX_LAYERS: usize = 5;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NeighborSample {
    pub center: usize,
    pub sampled: Vec<usize>,
}

impl NeighborSample {
    /// Sorted distinct members of the sample.
    pub fn distinct(&self) -> Vec<usize> {
        let mut d = self.sampled.clone();
        d.sort_unstable();
        d.dedup();
        d
    }
}

/// `k` neighbors of `v`: without replacement when `deg(v) >= k`; otherwise
/// every neighbor once (shuffled) topped up with replacement draws; an
/// isolated node samples itself.
pub fn sample_neighbors(graph: &Graph, v: usize, k: usize, rng: &mut rng::Rng) -> NeighborSample {
    let nb = graph.neighbors(v);
    let sampled = if nb.is_empty() {
        vec![v; k]
    } else if nb.len() >= k {
        rand::seq::index::sample(rng, nb.len(), k).into_iter().map(|i| nb[i]).collect()
    } else {
        let mut s = nb.to_vec();
        s.shuffle(rng);
        while s.len() < k {
            s.push(nb[rng.gen_range(0..nb.len())]);
        }
        s
    };
    NeighborSample { center: v, sampled }
}

/// MEAN neighborhood sharing.
pub fn neighborhood_sharing(neighbor_rows: ArrayView2<f64>) -> Result<Array1<f64>> {
    neighbor_rows
        .mean_axis(Axis(0))
        .ok_or_else(|| Error::Config("neighborhood sharing over zero rows".into()))
}

/// `tanh([self_row, shared] · W)`.
pub fn membership_encoding(
    self_row: ArrayView1<f64>,
    shared: ArrayView1<f64>,
    w: &LayerWeights,
) -> Result<Array1<f64>> {
    let d = self_row.len();
    if shared.len() != d || w.in_dim() != 2 * d {
        return Err(Error::shape(
            "membership encoding",
            format!("{} weight rows for two {}-vectors", 2 * d, d),
            format!("{} rows, shared width {}", w.in_dim(), shared.len()),
        ));
    }
    let out = self_row.dot(&w.w.slice(s![..d, ..])) + shared.dot(&w.w.slice(s![d.., ..]));
    Ok(out.mapv_into(f64::tanh))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Block {
    Own = 0,
    Shared = 1,
}

const BLOCKS: [Block; 2] = [Block::Own, Block::Shared];

fn block_offset(block: Block, n: usize, f: usize) -> usize {
    match block {
        Block::Own => 0,
        Block::Shared => n + f,
    }
}

/// `kᵀ W` over the modularity rows starting at `offset`.
fn degree_weighted_rows(graph: &Graph, w: &Matrix, offset: usize) -> Array1<f64> {
    let mut acc = Array1::zeros(w.ncols());
    for v in 0..graph.n_nodes() {
        acc.scaled_add(graph.degree(v) as f64, &w.row(offset + v));
    }
    acc
}

/// First-layer projections `[b_v, x_v] · W_block` computed from adjacency.
///
/// While an epoch is in progress the effective modularity rows are
/// `W[u] + k_u · pending`.
pub(crate) struct FirstLayer<'a> {
    graph: &'a Graph,
    w: &'a Matrix,
    n: usize,
    f: usize,
    two_m: f64,
    k_w: [Array1<f64>; 2],
    pending: Option<[ArrayView1<'a, f64>; 2]>,
}

impl<'a> FirstLayer<'a> {
    pub(crate) fn new(graph: &'a Graph, w: &'a Matrix) -> Self {
        let (n, f) = (graph.n_nodes(), graph.feature_dim());
        debug_assert_eq!(w.nrows(), 2 * (n + f));
        let k_w = BLOCKS.map(|b| degree_weighted_rows(graph, w, block_offset(b, n, f)));
        Self { graph, w, n, f, two_m: 2.0 * graph.n_edges() as f64, k_w, pending: None }
    }

    fn with_state(graph: &'a Graph, w: &'a Matrix, state: &'a EpochState, direction: &'a [LayerWeights; 2]) -> Self {
        let k_w = BLOCKS.map(|b| &state.k_w[b as usize] + &(&direction[b as usize].w.row(0) * state.k_norm_sq));
        Self {
            graph,
            w,
            n: graph.n_nodes(),
            f: graph.feature_dim(),
            two_m: 2.0 * graph.n_edges() as f64,
            k_w,
            pending: Some(BLOCKS.map(|b| direction[b as usize].w.row(0))),
        }
    }

    /// `b_v · W_block` (modularity part only).
    pub(crate) fn project_modularity(&self, v: usize, block: Block) -> Array1<f64> {
        let off = block_offset(block, self.n, self.f);
        let kv = self.graph.degree(v) as f64;
        let mut out = &self.k_w[block as usize] * (-kv / self.two_m);
        let mut degree_sum = 0.0;
        for &u in self.graph.neighbors(v) {
            out += &self.w.row(off + u);
            degree_sum += self.graph.degree(u) as f64;
        }
        if let Some(pending) = &self.pending {
            out.scaled_add(degree_sum, &pending[block as usize]);
        }
        out
    }

    /// `x · W_block` (feature part only).
    pub(crate) fn add_features(&self, out: &mut Array1<f64>, x: ArrayView1<f64>, block: Block) {
        let off = block_offset(block, self.n, self.f) + self.n;
        for (f, &xf) in x.iter().enumerate() {
            if xf != 0.0 {
                out.scaled_add(xf, &self.w.row(off + f));
            }
        }
    }

    pub(crate) fn project(&self, v: usize, block: Block) -> Array1<f64> {
        let mut out = self.project_modularity(v, block);
        if let Some(x) = self.graph.features() {
            self.add_features(&mut out, x.row(v), block);
        }
        out
    }
}

/// Per-epoch bookkeeping for the sparse first-layer update.
struct EpochState {
    /// `kᵀ W` of each block's modularity rows, kept current as rows change.
    k_w: [Array1<f64>; 2],
    k_norm_sq: f64,
}

/// Nodes needed at every depth of a minibatch forward pass. `levels[l]`
/// starts with the nodes of `levels[l + 1]` in the same order.
struct SampledTree {
    levels: Vec<Vec<usize>>,
    /// `samples[l][i]`: indices into `levels[l]` of the distinct sampled
    /// neighbors of node `i` of `levels[l + 1]`.
    samples: Vec<Vec<Vec<usize>>>,
}

impl SampledTree {
    fn build(graph: &Graph, batch: &[usize], layers: usize, k: usize, rng: &mut rng::Rng) -> Self {
        let mut levels = vec![Vec::new(); layers + 1];
        let mut samples = vec![Vec::new(); layers];
        levels[layers] = batch.to_vec();
        for l in (0..layers).rev() {
            let upper = &levels[l + 1];
            let mut nodes = upper.clone();
            let mut index: HashMap<usize, usize> =
                nodes.iter().enumerate().map(|(i, &v)| (v, i)).collect();
            let mut level_samples = Vec::with_capacity(upper.len());
            for &v in upper {
                let drawn = sample_neighbors(graph, v, k, rng).distinct();
                let idx = drawn
                    .into_iter()
                    .map(|u| {
                        *index.entry(u).or_insert_with(|| {
                            nodes.push(u);
                            nodes.len() - 1
                        })
                    })
                    .collect();
                level_samples.push(idx);
            }
            levels[l] = nodes;
            samples[l] = level_samples;
        }
        Self { levels, samples }
    }
}

struct TreeForward {
    /// Output of layer `l + 1` for the nodes of `levels[l + 1]`.
    outputs: Vec<Matrix>,
    /// Concatenated `[own, shared]` inputs of layers 2.. (index `l - 1`).
    inputs: Vec<Matrix>,
}

fn mean_rows(m: &Matrix, idx: &[usize]) -> Array1<f64> {
    let mut acc = Array1::zeros(m.ncols());
    for &j in idx {
        acc += &m.row(j);
    }
    acc / idx.len() as f64
}

/// First-layer gradient `S - k ⊗ c_block`: explicit rows `S` plus one
/// rank-one degree term per block.
struct FirstLayerGrad {
    rows: Vec<usize>,
    values: Matrix,
    degree_terms: [Array1<f64>; 2],
}

struct RowAccumulator {
    index: HashMap<usize, usize>,
    rows: Vec<usize>,
    values: Vec<f64>,
    width: usize,
}

impl RowAccumulator {
    fn new(width: usize) -> Self {
        Self { index: HashMap::new(), rows: Vec::new(), values: Vec::new(), width }
    }

    fn add(&mut self, row: usize, scale: f64, g: ArrayView1<f64>) {
        let slot = *self.index.entry(row).or_insert_with(|| {
            self.rows.push(row);
            self.values.resize(self.values.len() + self.width, 0.0);
            self.rows.len() - 1
        });
        let dst = &mut self.values[slot * self.width..(slot + 1) * self.width];
        for (d, &x) in dst.iter_mut().zip(g.iter()) {
            *d += scale * x;
        }
    }

    fn finish(self) -> (Vec<usize>, Matrix) {
        let n = self.rows.len();
        (self.rows, Array2::from_shape_vec((n, self.width), self.values).expect("row-major"))
    }
}

/// Adam on a single row with global step `t`.
fn adam_row(
    mut w: ArrayViewMut1<f64>,
    mut m: ArrayViewMut1<f64>,
    mut v: ArrayViewMut1<f64>,
    g: ArrayView1<f64>,
    lr: f64,
    t: u64,
) {
    let c1 = 1.0 - ADAM_BETA1.powi(t as i32);
    let c2 = 1.0 - ADAM_BETA2.powi(t as i32);
    Zip::from(&mut w).and(&mut m).and(&mut v).and(&g).for_each(|w, m, v, &g| {
        *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
        *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
        *w -= lr * (*m / c1) / ((*v / c2).sqrt() + ADAM_EPSILON);
    });
}

#[derive(Debug, Clone)]
pub struct TwoStageModel {
    pub weights: Vec<LayerWeights>,
    pub config: TrainingConfig,
    pub n_base: usize,
    pub feature_dim: usize,
    /// Summed minibatch loss of every epoch.
    pub loss_trace: Vec<f64>,
    /// Per-block degree direction `p` (1 x d₁) with its Adam state; folded
    /// into the first layer as `k ⊗ p` at the end of each epoch.
    degree_direction: [LayerWeights; 2],
}

impl TwoStageModel {
    pub fn new(graph: &Graph, config: TrainingConfig) -> Result<Self> {
        config.validate_depth(MAX_LAYERS)?;
        if graph.n_edges() == 0 {
            return Err(Error::EmptyGraph);
        }
        let (n, f) = (graph.n_nodes(), graph.feature_dim());
        let mut prev = n + f;
        let mut weights = Vec::with_capacity(config.layer_dims.len());
        for (l, &d) in config.layer_dims.iter().enumerate() {
            weights.push(init_weights(2 * prev, d, rng::derive_seed(config.seed, "twostage-layer", l as u64)));
            prev = d;
        }
        let d1 = config.layer_dims[0];
        Ok(Self {
            weights,
            config,
            n_base: n,
            feature_dim: f,
            loss_trace: Vec::new(),
            degree_direction: Self::fresh_direction(d1),
        })
    }

    fn fresh_direction(d1: usize) -> [LayerWeights; 2] {
        [0, 1].map(|_| LayerWeights::from_matrix(Array2::zeros((1, d1))))
    }

    pub fn from_weights(graph: &Graph, config: TrainingConfig, weights: Vec<Matrix>) -> Result<Self> {
        let mut model = Self::new(graph, config)?;
        if weights.len() != model.weights.len() {
            return Err(Error::shape("layer count", model.weights.len(), weights.len()));
        }
        for (have, want) in weights.iter().zip(&model.weights) {
            if have.raw_dim() != want.w.raw_dim() {
                return Err(Error::shape(
                    "layer weights",
                    format!("{:?}", want.w.dim()),
                    format!("{:?}", have.dim()),
                ));
            }
        }
        model.weights = weights.into_iter().map(LayerWeights::from_matrix).collect();
        Ok(model)
    }

    pub fn layers(&self) -> usize {
        self.weights.len()
    }

    /// Learnable parameters; the inner-product decoder adds none.
    pub fn parameter_count(&self) -> usize {
        self.weights.iter().map(|w| w.w.len()).sum()
    }

    /// The first `layers` layers as a standalone model with fresh optimizer
    /// state.
    pub fn truncated(&self, layers: usize) -> Result<Self> {
        if layers == 0 || layers > self.layers() {
            return Err(Error::Config(format!("cannot keep {layers} of {} layers", self.layers())));
        }
        let mut config = self.config.clone();
        config.layer_dims.truncate(layers);
        Ok(Self {
            weights: self.weights[..layers].iter().map(|w| LayerWeights::from_matrix(w.w.clone())).collect(),
            degree_direction: Self::fresh_direction(config.layer_dims[0]),
            config,
            n_base: self.n_base,
            feature_dim: self.feature_dim,
            loss_trace: Vec::new(),
        })
    }

    fn check_graph(&self, graph: &Graph) -> Result<()> {
        if graph.n_nodes() != self.n_base || graph.feature_dim() != self.feature_dim {
            return Err(Error::shape(
                "two-stage graph",
                format!("{} nodes, {} features", self.n_base, self.feature_dim),
                format!("{} nodes, {} features", graph.n_nodes(), graph.feature_dim()),
            ));
        }
        Ok(())
    }

    fn forward_tree(&self, first: &FirstLayer, tree: &SampledTree) -> TreeForward {
        let level0 = &tree.levels[0];
        let shared: Vec<Array1<f64>> = level0.iter().map(|&u| first.project(u, Block::Shared)).collect();
        let d1 = self.weights[0].out_dim();
        let level1 = &tree.levels[1];
        let mut h = Array2::zeros((level1.len(), d1));
        for (i, &v) in level1.iter().enumerate() {
            let idx = &tree.samples[0][i];
            let mut pre = first.project(v, Block::Own);
            let mut acc = Array1::zeros(d1);
            for &j in idx {
                acc += &shared[j];
            }
            pre.scaled_add(1.0 / idx.len() as f64, &acc);
            h.row_mut(i).assign(&pre.mapv_into(f64::tanh));
        }
        let mut outputs = vec![h];
        let mut inputs = Vec::new();
        for l in 1..self.layers() {
            let prev = outputs.last().expect("layer output");
            let d = prev.ncols();
            let nodes = &tree.levels[l + 1];
            let mut x = Array2::zeros((nodes.len(), 2 * d));
            for i in 0..nodes.len() {
                x.slice_mut(s![i, ..d]).assign(&prev.row(i));
                x.slice_mut(s![i, d..]).assign(&mean_rows(prev, &tree.samples[l][i]));
            }
            let out = x.dot(&self.weights[l].w).mapv_into(f64::tanh);
            inputs.push(x);
            outputs.push(out);
        }
        TreeForward { outputs, inputs }
    }

    /// Gradients of layers 2.. (dense) and of the first layer (sparse).
    fn backward_tree(
        &self,
        graph: &Graph,
        tree: &SampledTree,
        fwd: &TreeForward,
        upstream: Matrix,
    ) -> (FirstLayerGrad, Vec<Matrix>) {
        let layers = self.layers();
        let mut upper = vec![Array2::zeros((0, 0)); layers - 1];
        let mut d_out = upstream;
        for l in (1..layers).rev() {
            let mut delta = d_out;
            Zip::from(&mut delta).and(&fwd.outputs[l]).for_each(|g, &o| *g *= 1.0 - o * o);
            upper[l - 1] = fwd.inputs[l - 1].t().dot(&delta);
            let d_x = delta.dot(&self.weights[l].w.t());
            let d = d_x.ncols() / 2;
            let mut d_prev = Array2::zeros((tree.levels[l].len(), d));
            for (i, idx) in tree.samples[l].iter().enumerate() {
                let mut own = d_prev.row_mut(i);
                own += &d_x.slice(s![i, ..d]);
                let share = &d_x.slice(s![i, d..]) / idx.len() as f64;
                for &j in idx {
                    let mut row = d_prev.row_mut(j);
                    row += &share;
                }
            }
            d_out = d_prev;
        }

        let mut delta = d_out;
        Zip::from(&mut delta).and(&fwd.outputs[0]).for_each(|g, &o| *g *= 1.0 - o * o);
        let level0 = &tree.levels[0];
        let d1 = delta.ncols();
        let mut shared_delta = Array2::<f64>::zeros((level0.len(), d1));
        for (i, idx) in tree.samples[0].iter().enumerate() {
            let share = &delta.row(i) / idx.len() as f64;
            for &j in idx {
                let mut row = shared_delta.row_mut(j);
                row += &share;
            }
        }

        let (n, f) = (self.n_base, self.feature_dim);
        let two_m = 2.0 * graph.n_edges() as f64;
        let mut acc = RowAccumulator::new(d1);
        let mut degree_terms = [Array1::<f64>::zeros(d1), Array1::<f64>::zeros(d1)];
        let mut accumulate = |v: usize, g: ArrayView1<f64>, block: Block| {
            let off = block_offset(block, n, f);
            for &u in graph.neighbors(v) {
                acc.add(off + u, 1.0, g);
            }
            degree_terms[block as usize].scaled_add(graph.degree(v) as f64 / two_m, &g);
            if let Some(x) = graph.features() {
                for (c, &xf) in x.row(v).iter().enumerate() {
                    if xf != 0.0 {
                        acc.add(off + n + c, xf, g);
                    }
                }
            }
        };
        for (i, &v) in tree.levels[1].iter().enumerate() {
            accumulate(v, delta.row(i), Block::Own);
        }
        for (j, &u) in level0.iter().enumerate() {
            accumulate(u, shared_delta.row(j), Block::Shared);
        }
        let (rows, values) = acc.finish();
        (FirstLayerGrad { rows, values, degree_terms }, upper)
    }

    fn batch_pass(
        &self,
        graph: &Graph,
        first: &FirstLayer,
        batch: &[usize],
        rng: &mut rng::Rng,
    ) -> Result<(f64, FirstLayerGrad, Vec<Matrix>)> {
        let tree = SampledTree::build(graph, batch, self.layers(), self.config.neighbor_samples, rng);
        let fwd = self.forward_tree(first, &tree);
        let z = fwd.outputs.last().expect("layer output");
        let target = Array2::from_shape_fn((batch.len(), batch.len()), |(i, j)| {
            graph.modularity_entry(batch[i], batch[j])
        });
        let (loss, upstream) = reconstruction_loss_and_grad(z, &target, self.config.decoder)?;
        let (first_grad, upper) = self.backward_tree(graph, &tree, &fwd, upstream);
        Ok((loss, first_grad, upper))
    }

    /// Minibatch loss and dense weight gradients with neighbor samples drawn
    /// from `sample_seed`; the same seed reproduces the same sampled tree.
    pub fn minibatch_objective(
        &self,
        graph: &Graph,
        batch: &[usize],
        sample_seed: u64,
    ) -> Result<(f64, Vec<Matrix>)> {
        self.check_graph(graph)?;
        let mut rng = rng::stream(sample_seed, "twostage-objective", 0);
        let first = FirstLayer::new(graph, &self.weights[0].w);
        let (loss, sparse, upper) = self.batch_pass(graph, &first, batch, &mut rng)?;
        let (n, f) = (self.n_base, self.feature_dim);
        let mut g0 = Array2::zeros(self.weights[0].w.raw_dim());
        for (slot, &r) in sparse.rows.iter().enumerate() {
            g0.row_mut(r).assign(&sparse.values.row(slot));
        }
        for b in BLOCKS {
            let off = block_offset(b, n, f);
            for v in 0..n {
                g0.row_mut(off + v).scaled_add(-(graph.degree(v) as f64), &sparse.degree_terms[b as usize]);
            }
        }
        let mut grads = vec![g0];
        grads.extend(upper);
        Ok((loss, grads))
    }

    /// One pass over all nodes in shuffled minibatches; returns the summed
    /// minibatch loss.
    ///
    /// Layers 2.. take dense Adam steps. The first layer's gradient is
    /// `S - k ⊗ c`; rows of `S` take lazy Adam steps while the rank-one
    /// part is learned through the degree direction `p`, so a minibatch
    /// never touches all `N` rows.
    pub fn train_epoch(&mut self, graph: &Graph, epoch: usize, lr: f64) -> Result<f64> {
        self.check_graph(graph)?;
        let (n, f) = (self.n_base, self.feature_dim);
        let degrees: Vec<f64> = graph.degrees().into_iter().map(|d| d as f64).collect();
        let mut state = EpochState {
            k_w: BLOCKS.map(|b| degree_weighted_rows(graph, &self.weights[0].w, block_offset(b, n, f))),
            k_norm_sq: degrees.iter().map(|k| k * k).sum(),
        };
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng::stream(self.config.seed, "twostage-batch-order", epoch as u64));
        let mut sampler = rng::stream(self.config.seed, "twostage-sample", epoch as u64);
        let non_finite = |context| Error::NonFinite { context, epoch };
        let mut total = 0.0;
        for batch in order.chunks(self.config.minibatch_size) {
            let (loss, sparse, upper) = {
                let first = FirstLayer::with_state(graph, &self.weights[0].w, &state, &self.degree_direction);
                self.batch_pass(graph, &first, batch, &mut sampler)?
            };
            if !loss.is_finite() {
                return Err(non_finite("two-stage loss"));
            }
            for (w, g) in self.weights[1..].iter_mut().zip(&upper) {
                adam_update(w, g, lr).map_err(|_| non_finite("two-stage gradient"))?;
            }
            if sparse.values.iter().chain(sparse.degree_terms.iter().flatten()).any(|x| !x.is_finite()) {
                return Err(non_finite("two-stage gradient"));
            }

            let mut direction_grad = sparse.degree_terms.clone().map(|c| c * -state.k_norm_sq);
            let layer = &mut self.weights[0];
            layer.step_count += 1;
            for (slot, &r) in sparse.rows.iter().enumerate() {
                let g = sparse.values.row(slot);
                let before = layer.w.row(r).to_owned();
                adam_row(
                    layer.w.row_mut(r),
                    layer.first_moment.row_mut(r),
                    layer.second_moment.row_mut(r),
                    g,
                    lr,
                    layer.step_count,
                );
                for b in BLOCKS {
                    let off = block_offset(b, n, f);
                    if (off..off + n).contains(&r) {
                        let k = degrees[r - off];
                        state.k_w[b as usize].scaled_add(k, &(&layer.w.row(r) - &before));
                        direction_grad[b as usize].scaled_add(k, &g);
                    }
                }
            }
            for (dir, g) in self.degree_direction.iter_mut().zip(direction_grad) {
                adam_update(dir, &g.insert_axis(Axis(0)), lr).map_err(|_| non_finite("two-stage gradient"))?;
            }
            total += loss;
        }
        self.fold_degree_direction(graph);
        Ok(total)
    }

    fn fold_degree_direction(&mut self, graph: &Graph) {
        let (n, f) = (self.n_base, self.feature_dim);
        for b in BLOCKS {
            let off = block_offset(b, n, f);
            let p = self.degree_direction[b as usize].w.row(0).to_owned();
            for v in 0..n {
                self.weights[0].w.row_mut(off + v).scaled_add(graph.degree(v) as f64, &p);
            }
            self.degree_direction[b as usize].w.fill(0.0);
        }
    }

    pub fn fit(&mut self, graph: &Graph, epochs: usize, lr: f64) -> Result<()> {
        for epoch in 0..epochs {
            let loss = self.train_epoch(graph, epoch, lr)?;
            log::debug!("two-stage epoch {epoch} loss {loss:.6}");
            self.loss_trace.push(loss);
        }
        Ok(())
    }

    /// Full-graph embedding with neighbor samples drawn from `sample_seed`.
    pub fn embed_with_seed(&self, graph: &Graph, sample_seed: u64) -> Result<Matrix> {
        self.check_graph(graph)?;
        let all: Vec<usize> = (0..graph.n_nodes()).collect();
        let mut rng = rng::stream(sample_seed, "twostage-embed", 0);
        let tree = SampledTree::build(graph, &all, self.layers(), self.config.neighbor_samples, &mut rng);
        let first = FirstLayer::new(graph, &self.weights[0].w);
        let mut fwd = self.forward_tree(&first, &tree);
        Ok(fwd.outputs.pop().expect("layer output"))
    }

    pub fn embed(&self, graph: &Graph) -> Result<Matrix> {
        self.embed_with_seed(graph, self.config.seed)
    }
}

pub fn train_twostage(graph: &Graph, config: TrainingConfig) -> Result<(TwoStageModel, Matrix)> {
    let (epochs, lr) = (config.epochs, config.learning_rate);
    let mut model = TwoStageModel::new(graph, config)?;
    model.fit(graph, epochs, lr)?;
    let z = model.embed(graph)?;
    Ok((model, z))
}
