//! Graph autoencoder baseline: two-layer GCN encoder (ReLU hidden layer,
//! linear output) with a sigmoid inner-product decoder reconstructing the
//! adjacency matrix under positively reweighted cross-entropy.

use ndarray::{Array2, Zip};

use crate::error::{Error, Result};
use crate::graph::{normalized_adjacency, Graph, NormalizedAdjacency};
use crate::nn::{adam_update, init_weights, LayerWeights, TrainingConfig};
use crate::rng;
use crate::Matrix;

#[derive(Debug, Clone)]
pub struct GaeModel {
    pub weights: Vec<LayerWeights>,
    pub a_norm: NormalizedAdjacency,
    pub input: Matrix,
    pub adjacency: Matrix,
    pub pos_weight: f64,
    pub config: TrainingConfig,
    pub loss_trace: Vec<f64>,
}

struct GaeCache {
    a_x: Matrix,
    hidden_pre: Matrix,
    a_r: Matrix,
    z: Matrix,
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `Ã · relu(Ã X W₀) · W₁`.
pub fn gae_forward(a_norm: &NormalizedAdjacency, x: &Matrix, w0: &Matrix, w1: &Matrix) -> Result<Matrix> {
    Ok(forward_cached(a_norm, x, w0, w1)?.z)
}

fn forward_cached(a_norm: &NormalizedAdjacency, x: &Matrix, w0: &Matrix, w1: &Matrix) -> Result<GaeCache> {
    if x.nrows() != a_norm.n() || x.ncols() != w0.nrows() || w0.ncols() != w1.nrows() {
        return Err(Error::shape(
            "gae forward",
            format!("{} input rows, chained weights", a_norm.n()),
            format!("{:?} · {:?} · {:?}", x.dim(), w0.dim(), w1.dim()),
        ));
    }
    let a_x = a_norm.apply(x);
    let hidden_pre = a_x.dot(w0);
    let a_r = a_norm.apply(&hidden_pre.mapv(|v| v.max(0.0)));
    let z = a_r.dot(w1);
    Ok(GaeCache { a_x, hidden_pre, a_r, z })
}

/// Mean weighted binary cross-entropy between `sigmoid(Z Zᵀ)` and `A`, and
/// its gradient with respect to `Z`.
pub fn gae_loss_and_grad(z: &Matrix, adjacency: &Matrix, pos_weight: f64) -> Result<(f64, Matrix)> {
    let n = z.nrows();
    if adjacency.dim() != (n, n) {
        return Err(Error::shape("gae adjacency", format!("{n}x{n}"), format!("{:?}", adjacency.dim())));
    }
    let scale = 1.0 / (n * n) as f64;
    let mut g = z.dot(&z.t());
    let mut loss = 0.0;
    Zip::from(&mut g).and(adjacency).for_each(|s, &a| {
        let logit = *s;
        let p = sigmoid(logit);
        loss += pos_weight * a * softplus(-logit) + (1.0 - a) * softplus(logit);
        *s = scale * (-pos_weight * a * (1.0 - p) + (1.0 - a) * p);
    });
    Ok((loss * scale, 2.0 * g.dot(z)))
}

impl GaeModel {
    pub fn new(graph: &Graph, config: TrainingConfig) -> Result<Self> {
        config.validate()?;
        if config.layer_dims.len() != 2 {
            return Err(Error::Config("the autoencoder baseline has exactly two layers".into()));
        }
        let n = graph.n_nodes();
        let m2 = 2 * graph.n_edges();
        if m2 == 0 {
            return Err(Error::EmptyGraph);
        }
        let input = match graph.features() {
            Some(x) => x.clone(),
            None => Array2::eye(n),
        };
        let mut adjacency = Array2::zeros((n, n));
        for &(u, v) in graph.edges() {
            adjacency[[u, v]] = 1.0;
            adjacency[[v, u]] = 1.0;
        }
        let (h, d) = (config.layer_dims[0], config.layer_dims[1]);
        let weights = vec![
            init_weights(input.ncols(), h, rng::derive_seed(config.seed, "gae-layer", 0)),
            init_weights(h, d, rng::derive_seed(config.seed, "gae-layer", 1)),
        ];
        Ok(Self {
            weights,
            a_norm: normalized_adjacency(graph),
            input,
            adjacency,
            pos_weight: (n * n - m2) as f64 / m2 as f64,
            config,
            loss_trace: Vec::new(),
        })
    }

    /// Model with the given `(W₀, W₁)` (fresh optimizer state).
    pub fn from_weights(graph: &Graph, config: TrainingConfig, weights: Vec<Matrix>) -> Result<Self> {
        let mut model = Self::new(graph, config)?;
        if weights.len() != 2 {
            return Err(Error::shape("layer count", 2, weights.len()));
        }
        for (have, want) in weights.iter().zip(&model.weights) {
            if have.dim() != want.w.dim() {
                return Err(Error::shape("layer weights", format!("{:?}", want.w.dim()), format!("{:?}", have.dim())));
            }
        }
        model.weights = weights.into_iter().map(LayerWeights::from_matrix).collect();
        Ok(model)
    }

    pub fn embed(&self) -> Matrix {
        gae_forward(&self.a_norm, &self.input, &self.weights[0].w, &self.weights[1].w)
            .expect("shapes fixed at construction")
    }

    /// Loss and gradients for `(W₀, W₁)`.
    pub fn objective(&self) -> Result<(f64, [Matrix; 2])> {
        let cache = forward_cached(&self.a_norm, &self.input, &self.weights[0].w, &self.weights[1].w)?;
        let (loss, d_z) = gae_loss_and_grad(&cache.z, &self.adjacency, self.pos_weight)?;
        let g1 = cache.a_r.t().dot(&d_z);
        let mut d_pre = self.a_norm.apply(&d_z.dot(&self.weights[1].w.t()));
        Zip::from(&mut d_pre).and(&cache.hidden_pre).for_each(|g, &p| {
            if p <= 0.0 {
                *g = 0.0;
            }
        });
        let g0 = cache.a_x.t().dot(&d_pre);
        Ok((loss, [g0, g1]))
    }

    pub fn step(&mut self, epoch: usize) -> Result<f64> {
        let (loss, grads) = self.objective()?;
        if !loss.is_finite() {
            return Err(Error::NonFinite { context: "gae loss", epoch });
        }
        for (w, g) in self.weights.iter_mut().zip(&grads) {
            adam_update(w, g, self.config.learning_rate)
                .map_err(|_| Error::NonFinite { context: "gae gradient", epoch })?;
        }
        Ok(loss)
    }

    pub fn fit(&mut self, epochs: usize) -> Result<()> {
        for epoch in 0..epochs {
            let loss = self.step(epoch)?;
            self.loss_trace.push(loss);
        }
        Ok(())
    }
}

pub fn gae_train(graph: &Graph, config: TrainingConfig) -> Result<(GaeModel, Matrix)> {
    let epochs = config.epochs;
    let mut model = GaeModel::new(graph, config)?;
    model.fit(epochs)?;
    let z = model.embed();
    Ok((model, z))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{flatten, gradient_check, unflatten};
    use ndarray::array;
    use rand::{Rng, SeedableRng};

    fn random_matrix(r: usize, c: usize, seed: u64) -> Matrix {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        Array2::from_shape_simple_fn((r, c), || rng.gen_range(-1.0..1.0))
    }

    fn toy() -> Graph {
        Graph::from_edges(6, [(0, 1), (1, 2), (0, 2), (2, 3), (3, 4), (4, 5), (3, 5)])
    }

    #[test]
    fn forward_examples() {
        let g = toy();
        let a = normalized_adjacency(&g);
        let x = Array2::eye(6);
        let z = gae_forward(&a, &x, &Array2::zeros((6, 3)), &Array2::zeros((3, 2))).unwrap();
        assert!(z.iter().all(|&v| v == 0.0));

        let single = normalized_adjacency(&Graph::from_edges(1, []));
        for (x, w0, w1) in [(2.0, 0.5, -3.0), (2.0, -0.5, -3.0)] {
            let z = gae_forward(&single, &array![[x]], &array![[w0]], &array![[w1]]).unwrap();
            assert_eq!(z[[0, 0]], (x * w0).max(0.0) * w1);
        }

        let g5 = Graph::from_edges(5, [(0, 1), (1, 2), (2, 3), (3, 4), (1, 4)]);
        let a5 = normalized_adjacency(&g5);
        let (x, w0, w1) = (random_matrix(5, 4, 1), random_matrix(4, 3, 2), random_matrix(3, 2, 3));
        let got = gae_forward(&a5, &x, &w0, &w1).unwrap();
        let av = &a5.values;
        let mut r = Array2::<f64>::zeros((5, 3));
        for i in 0..5 {
            for c in 0..3 {
                let mut pre = 0.0;
                for j in 0..5 {
                    for f in 0..4 {
                        pre += av[[i, j]] * x[[j, f]] * w0[[f, c]];
                    }
                }
                r[[i, c]] = pre.max(0.0);
            }
        }
        for i in 0..5 {
            for c in 0..2 {
                let mut z = 0.0;
                for j in 0..5 {
                    for h in 0..3 {
                        z += av[[i, j]] * r[[j, h]] * w1[[h, c]];
                    }
                }
                assert!((got[[i, c]] - z).abs() < 1e-12);
            }
        }
        assert!(gae_forward(&a5, &x, &w1, &w0).is_err());
    }

    #[test]
    fn perfect_logits_have_near_zero_loss() {
        let adjacency = array![[1.0, 1.0, 0.0, 0.0], [1.0, 1.0, 0.0, 0.0], [0.0, 0.0, 1.0, 1.0], [0.0, 0.0, 1.0, 1.0]];
        let z = array![[3.0, -3.0], [3.0, -3.0], [-3.0, 3.0], [-3.0, 3.0]];
        let (loss, grad) = gae_loss_and_grad(&z, &adjacency, 1.0).unwrap();
        assert!(loss < 1e-7, "{loss}");
        assert!(grad.iter().all(|g| g.abs() < 1e-6));
    }

    #[test]
    fn gradients_match_finite_differences() {
        for seed in 0..4u64 {
            let g = Graph::from_edges(8, (0..8).map(|i| (i, (i * 3 + 1 + seed as usize) % 8)));
            let config = TrainingConfig { layer_dims: vec![4, 3], seed, ..Default::default() };
            let model = GaeModel::new(&g, config).unwrap();
            let (_, grads) = model.objective().unwrap();
            let shapes: Vec<_> = model.weights.iter().map(|w| w.w.dim()).collect();
            let params = flatten(&[model.weights[0].w.clone(), model.weights[1].w.clone()]);
            let report = gradient_check(
                |p| {
                    let mut m = model.clone();
                    for (w, new) in m.weights.iter_mut().zip(unflatten(p, &shapes)) {
                        w.w = new;
                    }
                    m.objective().unwrap().0
                },
                &params,
                &flatten(&grads),
                1e-4,
            );
            assert!(report.passed, "seed {seed}: {report:?}");
        }
    }

    #[test]
    fn descends_on_toy_graph() {
        let config = TrainingConfig { layer_dims: vec![4, 2], learning_rate: 1e-3, ..Default::default() };
        let mut model = GaeModel::new(&toy(), config).unwrap();
        let mut prev = model.objective().unwrap().0;
        for epoch in 0..10 {
            model.step(epoch).unwrap();
            let now = model.objective().unwrap().0;
            assert!(now < prev, "epoch {epoch}");
            prev = now;
        }
        assert!(GaeModel::new(&toy(), TrainingConfig { layer_dims: vec![4], ..Default::default() }).is_err());
    }
}
