//! Full-batch GCN autoencoder reconstructing the modularity matrix.

use ndarray::{concatenate, Axis};

use crate::error::{Error, Result};
use crate::graph::{modularity_matrix, normalized_adjacency, Graph, ModularityMatrix};
use crate::nn::{
    adam_update, backprop_through_layers, gcn_forward, init_weights,
    reconstruction_loss_and_grad, LayerWeights, TrainingConfig,
};
use crate::graph::NormalizedAdjacency;
use crate::rng;
use crate::Matrix;

pub const MAX_LAYERS: usize = 5;

#[derive(Debug, Clone)]
pub struct OneStageModel {
    pub weights: Vec<LayerWeights>,
    pub config: TrainingConfig,
    pub a_norm: NormalizedAdjacency,
    pub input: Matrix,
    pub target: ModularityMatrix,
    /// Loss before each epoch's update followed by the final loss.
    pub loss_trace: Vec<f64>,
}

/// `[B | X]`, or `B` alone for a featureless graph.
pub fn build_input(b: &ModularityMatrix, graph: &Graph) -> Result<Matrix> {
    if b.n() != graph.n_nodes() {
        return Err(Error::shape("modularity matrix", graph.n_nodes(), b.n()));
    }
    match graph.features() {
        None => Ok(b.values.clone()),
        Some(x) => {
            if x.nrows() != b.n() {
                return Err(Error::shape("feature rows", b.n(), x.nrows()));
            }
            Ok(concatenate(Axis(1), &[b.values.view(), x.view()]).expect("row counts match"))
        }
    }
}

fn layer_shapes(input_dim: usize, dims: &[usize]) -> Vec<(usize, usize)> {
    let mut prev = input_dim;
    dims.iter()
        .map(|&d| {
            let shape = (prev, d);
            prev = d;
            shape
        })
        .collect()
}

impl OneStageModel {
    /// Freshly initialized model; layer `l` is seeded from
    /// `derive_seed(config.seed, "onestage-layer", l)`.
    pub fn new(graph: &Graph, config: TrainingConfig) -> Result<Self> {
        config.validate_depth(MAX_LAYERS)?;
        let target = modularity_matrix(graph)?;
        let input = build_input(&target, graph)?;
        let weights = layer_shapes(input.ncols(), &config.layer_dims)
            .into_iter()
            .enumerate()
            .map(|(l, (r, c))| init_weights(r, c, rng::derive_seed(config.seed, "onestage-layer", l as u64)))
            .collect();
        Ok(Self {
            weights,
            config,
            a_norm: normalized_adjacency(graph),
            input,
            target,
            loss_trace: Vec::new(),
        })
    }

    /// Model with the given weight matrices (fresh optimizer state).
    pub fn from_weights(graph: &Graph, config: TrainingConfig, weights: Vec<Matrix>) -> Result<Self> {
        let mut model = Self::new(graph, config)?;
        let expected = layer_shapes(model.input.ncols(), &model.config.layer_dims);
        if weights.len() != expected.len() {
            return Err(Error::shape("layer count", expected.len(), weights.len()));
        }
        for (w, shape) in weights.iter().zip(&expected) {
            if w.dim() != *shape {
                return Err(Error::shape("layer weights", format!("{shape:?}"), format!("{:?}", w.dim())));
            }
        }
        model.weights = weights.into_iter().map(LayerWeights::from_matrix).collect();
        Ok(model)
    }

    pub fn embed(&self) -> Matrix {
        gcn_forward(&self.a_norm, &self.input, &self.weights)
            .expect("shapes validated at construction")
            .outputs
            .pop()
            .expect("at least one layer")
    }

    pub fn loss(&self) -> f64 {
        let z = self.embed();
        crate::nn::reconstruction_loss(&z, &self.target.values, self.config.decoder)
            .expect("square target")
    }

    /// Loss and per-layer weight gradients.
    pub fn objective(&self) -> Result<(f64, Vec<Matrix>)> {
        let cache = gcn_forward(&self.a_norm, &self.input, &self.weights)?;
        let (loss, upstream) =
            reconstruction_loss_and_grad(cache.embedding(), &self.target.values, self.config.decoder)?;
        let grads = backprop_through_layers(&cache, &self.weights, &upstream, &self.a_norm)?;
        Ok((loss, grads))
    }

    /// One full-batch Adam step; returns the loss before the update.
    pub fn step(&mut self, epoch: usize) -> Result<f64> {
        let (loss, grads) = self.objective()?;
        if !loss.is_finite() {
            return Err(Error::NonFinite { context: "one-stage loss", epoch });
        }
        for (w, g) in self.weights.iter_mut().zip(&grads) {
            adam_update(w, g, self.config.learning_rate)
                .map_err(|_| Error::NonFinite { context: "one-stage gradient", epoch })?;
        }
        Ok(loss)
    }

    pub fn fit(&mut self, epochs: usize) -> Result<()> {
        for epoch in 0..epochs {
            let loss = self.step(epoch)?;
            self.loss_trace.push(loss);
            log::debug!("one-stage epoch {epoch} loss {loss:.6}");
        }
        let last = self.loss();
        if !last.is_finite() {
            return Err(Error::NonFinite { context: "one-stage loss", epoch: epochs });
        }
        self.loss_trace.push(last);
        Ok(())
    }

    pub fn parameter_count(&self) -> usize {
        self.weights.iter().map(|w| w.w.len()).sum()
    }
}

pub fn train_onestage(graph: &Graph, config: TrainingConfig) -> Result<(OneStageModel, Matrix)> {
    let epochs = config.epochs;
    let mut model = OneStageModel::new(graph, config)?;
    model.fit(epochs)?;
    let z = model.embed();
    Ok((model, z))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clustering::kmeans_fit;
    use crate::graph::CommunityAssignment;
    use crate::metrics::nmi;
    use crate::nn::gcn_layer_forward;
    use ndarray::{array, Array2};

    fn two_triangles() -> Graph {
        Graph::from_edges(6, [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)])
    }

    #[test]
    fn build_input_widths() {
        let g = two_triangles();
        let b = modularity_matrix(&g).unwrap();
        assert_eq!(build_input(&b, &g).unwrap(), b.values);
        let with = g.clone().with_features(Array2::from_elem((6, 2), 1.0)).unwrap();
        assert_eq!(build_input(&b, &with).unwrap().dim(), (6, 8));
        let zeros = g.with_features(Array2::zeros((6, 2))).unwrap();
        let input = build_input(&b, &zeros).unwrap();
        assert!(input.slice(ndarray::s![.., 6..]).iter().all(|&x| x == 0.0));
    }

    #[test]
    fn recovers_two_triangles() {
        let config = TrainingConfig { layer_dims: vec![4, 2], epochs: 200, ..Default::default() };
        let (model, z) = train_onestage(&two_triangles(), config).unwrap();
        let fit = kmeans_fit(&z, 2, 10, 0).unwrap();
        let truth = CommunityAssignment::from_labels(vec![0, 0, 0, 1, 1, 1]);
        assert_eq!(nmi(&fit.to_assignment(), &truth).unwrap(), 1.0);
        assert!(model.loss_trace.iter().all(|l| l.is_finite()));
        assert!(model.loss_trace.last() <= model.loss_trace.first());
    }

    #[test]
    fn zero_epochs_is_forward_only() {
        let g = two_triangles();
        let config = TrainingConfig { epochs: 0, ..Default::default() };
        let (model, z) = train_onestage(&g, config.clone()).unwrap();
        assert_eq!(z, OneStageModel::new(&g, config).unwrap().embed());
        assert_eq!(model.loss_trace.len(), 1);
    }

    #[test]
    fn embed_examples() {
        let g = Graph::from_edges(5, [(0, 1), (1, 2), (2, 3), (3, 4), (0, 4), (1, 3)]);
        let model = OneStageModel::new(&g, TrainingConfig::default()).unwrap();
        assert_eq!(model.embed(), model.embed());
        let mut h = model.input.clone();
        for w in &model.weights {
            h = gcn_layer_forward(&model.a_norm, &h, w).unwrap();
        }
        assert!((&h - &model.embed()).iter().all(|d| d.abs() < 1e-12));
        assert!(h.iter().all(|x| x.abs() < 1.0));
        let zero = OneStageModel::from_weights(
            &g,
            TrainingConfig::default(),
            vec![Array2::zeros((5, 32)), Array2::zeros((32, 16))],
        )
        .unwrap();
        assert!(zero.embed().iter().all(|&x| x == 0.0));
        assert!(OneStageModel::from_weights(&g, TrainingConfig::default(), vec![array![[1.0]]]).is_err());
    }

    #[test]
    fn descends_on_toy_graph() {
        let g = Graph::from_edges(6, [(0, 1), (1, 2), (0, 2), (2, 3), (3, 4), (4, 5), (3, 5)]);
        let config = TrainingConfig { layer_dims: vec![4, 2], learning_rate: 1e-3, ..Default::default() };
        let mut model = OneStageModel::new(&g, config).unwrap();
        let mut prev = model.loss();
        for epoch in 0..10 {
            model.step(epoch).unwrap();
            let now = model.loss();
            assert!(now < prev, "epoch {epoch}: {now} >= {prev}");
            prev = now;
        }
    }

    #[test]
    fn training_is_deterministic() {
        let g = two_triangles();
        let config = TrainingConfig { epochs: 15, ..Default::default() };
        let (a, za) = train_onestage(&g, config.clone()).unwrap();
        let (b, zb) = train_onestage(&g, config).unwrap();
        assert_eq!(za, zb);
        assert_eq!(a.loss_trace, b.loss_trace);
    }

    #[test]
    fn permutation_equivariance() {
        let g = Graph::from_edges(7, [(0, 1), (1, 2), (0, 2), (2, 3), (3, 4), (4, 5), (5, 6), (3, 6)]);
        let perm = [3, 6, 0, 5, 1, 4, 2];
        let pg = g.permuted(&perm);
        let config = TrainingConfig { layer_dims: vec![5, 3], epochs: 30, ..Default::default() };
        let mut base = OneStageModel::new(&g, config.clone()).unwrap();
        let mut w0 = Array2::zeros(base.weights[0].w.raw_dim());
        for (old, &new) in perm.iter().enumerate() {
            w0.row_mut(new).assign(&base.weights[0].w.row(old));
        }
        let mut moved =
            OneStageModel::from_weights(&pg, config, vec![w0, base.weights[1].w.clone()]).unwrap();
        base.fit(30).unwrap();
        moved.fit(30).unwrap();
        let (za, zb) = (base.embed(), moved.embed());
        for (old, &new) in perm.iter().enumerate() {
            for c in 0..3 {
                assert!((za[[old, c]] - zb[[new, c]]).abs() < 1e-8);
            }
        }
    }
}
