//! Dense numeric kernel: tanh graph-convolution layers, the parameter-free
//! inner-product decoder, the Frobenius reconstruction loss with its
//! hand-derived gradients, Adam, and a finite-difference gradient checker.

use ndarray::{Array2, Zip};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::NormalizedAdjacency;
use crate::rng;
use crate::Matrix;

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPSILON: f64 = 1e-8;

/// Nonlinearity applied to the inner products `Z Zᵀ` before comparison with
/// the target matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DecoderNonlinearity {
    #[default]
    Identity,
    Tanh,
}

impl DecoderNonlinearity {
    fn apply(self, s: f64) -> f64 {
        match self {
            DecoderNonlinearity::Identity => s,
            DecoderNonlinearity::Tanh => s.tanh(),
        }
    }

    /// Derivative expressed through the activated value.
    fn derivative(self, activated: f64) -> f64 {
        match self {
            DecoderNonlinearity::Identity => 1.0,
            DecoderNonlinearity::Tanh => 1.0 - activated * activated,
        }
    }
}

impl std::str::FromStr for DecoderNonlinearity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "identity" => Ok(Self::Identity),
            "tanh" => Ok(Self::Tanh),
            other => Err(Error::Config(format!("unknown decoder nonlinearity {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingConfig {
    /// Output width of each layer; the last entry is the embedding dimension.
    pub layer_dims: Vec<usize>,
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
    /// Nodes per minibatch (two-stage training only).
    pub minibatch_size: usize,
    /// Neighbors sampled per node and layer (two-stage training only).
    pub neighbor_samples: usize,
    pub decoder: DecoderNonlinearity,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            layer_dims: vec![32, 16],
            learning_rate: 0.01,
            epochs: 200,
            seed: 0,
            minibatch_size: 16,
            neighbor_samples: 5,
            decoder: DecoderNonlinearity::Identity,
        }
    }
}

impl TrainingConfig {
    /// `epochs = 0` is accepted and yields an untrained (initialized) model.
    pub fn validate(&self) -> Result<()> {
        if self.layer_dims.is_empty() || self.layer_dims.contains(&0) {
            return Err(Error::Config("layer_dims must be non-empty and positive".into()));
        }
        if self.neighbor_samples == 0 || self.minibatch_size == 0 {
            return Err(Error::Config(
                "neighbor_samples and minibatch_size must be at least 1".into(),
            ));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        Ok(())
    }

    pub fn validate_depth(&self, max_layers: usize) -> Result<()> {
        self.validate()?;
        if self.layer_dims.len() > max_layers {
            return Err(Error::Config(format!(
                "{} layers requested, at most {max_layers} supported",
                self.layer_dims.len()
            )));
        }
        Ok(())
    }

    pub fn embedding_dim(&self) -> usize {
        *self.layer_dims.last().expect("validated non-empty")
    }
}

/// One weight matrix together with its Adam state.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerWeights {
    pub w: Matrix,
    pub first_moment: Matrix,
    pub second_moment: Matrix,
    pub step_count: u64,
}

impl LayerWeights {
    pub fn from_matrix(w: Matrix) -> Self {
        let shape = w.raw_dim();
        Self {
            w,
            first_moment: Array2::zeros(shape.clone()),
            second_moment: Array2::zeros(shape),
            step_count: 0,
        }
    }

    pub fn in_dim(&self) -> usize {
        self.w.nrows()
    }

    pub fn out_dim(&self) -> usize {
        self.w.ncols()
    }
}

/// Uniform initialization in `±sqrt(6 / (in_dim + out_dim))`.
pub fn init_weights(in_dim: usize, out_dim: usize, seed: u64) -> LayerWeights {
    let bound = (6.0 / (in_dim + out_dim) as f64).sqrt();
    let mut rng = rng::stream(seed, "init-weights", 0);
    let w = Array2::from_shape_simple_fn((in_dim, out_dim), || rng.gen_range(-bound..=bound));
    LayerWeights::from_matrix(w)
}

fn check_inner(context: &'static str, left: &Matrix, right: &Matrix) -> Result<()> {
    if left.ncols() != right.nrows() {
        return Err(Error::shape(
            context,
            format!("{} rows", left.ncols()),
            format!("{} rows", right.nrows()),
        ));
    }
    Ok(())
}

/// `tanh(Ã · H · W)`.
pub fn gcn_layer_forward(
    a_norm: &NormalizedAdjacency,
    h: &Matrix,
    w: &LayerWeights,
) -> Result<Matrix> {
    check_inner("gcn layer input", h, &w.w)?;
    if h.nrows() != a_norm.n() {
        return Err(Error::shape("gcn layer nodes", a_norm.n(), h.nrows()));
    }
    Ok(a_norm.apply(&h.dot(&w.w)).mapv_into(f64::tanh))
}

/// Inputs and outputs of every layer of a forward pass, kept for backprop.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    pub inputs: Vec<Matrix>,
    pub outputs: Vec<Matrix>,
}

impl ForwardCache {
    pub fn embedding(&self) -> &Matrix {
        self.outputs.last().expect("at least one layer")
    }
}

/// Stacked [`gcn_layer_forward`] with every intermediate retained.
pub fn gcn_forward(
    a_norm: &NormalizedAdjacency,
    input: &Matrix,
    weights: &[LayerWeights],
) -> Result<ForwardCache> {
    let mut inputs = Vec::with_capacity(weights.len());
    let mut outputs = Vec::with_capacity(weights.len());
    let mut h = input.clone();
    for w in weights {
        let out = gcn_layer_forward(a_norm, &h, w)?;
        inputs.push(h);
        h = out.clone();
        outputs.push(out);
    }
    Ok(ForwardCache { inputs, outputs })
}

fn check_square_target(z: &Matrix, target: &Matrix) -> Result<()> {
    if target.nrows() != z.nrows() || target.ncols() != z.nrows() {
        return Err(Error::shape(
            "reconstruction target",
            format!("{0}x{0}", z.nrows()),
            format!("{}x{}", target.nrows(), target.ncols()),
        ));
    }
    Ok(())
}

/// `Σ_ij (σ(z_i · z_j) - t_ij)²`.
pub fn reconstruction_loss(
    z: &Matrix,
    target: &Matrix,
    decoder: DecoderNonlinearity,
) -> Result<f64> {
    check_square_target(z, target)?;
    let s = z.dot(&z.t());
    Ok(Zip::from(&s)
        .and(target)
        .fold(0.0, |acc, &s, &t| acc + (decoder.apply(s) - t).powi(2)))
}

/// Loss and its gradient with respect to `z`.
///
/// With `G_ij = 2 (σ(s_ij) - t_ij) σ'(s_ij)` symmetric, `∂L/∂Z = 2 G Z`.
pub fn reconstruction_loss_and_grad(
    z: &Matrix,
    target: &Matrix,
    decoder: DecoderNonlinearity,
) -> Result<(f64, Matrix)> {
    check_square_target(z, target)?;
    let mut g = z.dot(&z.t());
    let mut loss = 0.0;
    Zip::from(&mut g).and(target).for_each(|s, &t| {
        let activated = decoder.apply(*s);
        let residual = activated - t;
        loss += residual * residual;
        *s = 4.0 * residual * decoder.derivative(activated);
    });
    Ok((loss, g.dot(z)))
}

/// `4 (Z Zᵀ - B) Z`, the gradient of the identity-decoder loss.
pub fn loss_gradient_wrt_embedding(z: &Matrix, target: &Matrix) -> Result<Matrix> {
    reconstruction_loss_and_grad(z, target, DecoderNonlinearity::Identity).map(|(_, g)| g)
}

/// Weight gradients of a stacked tanh GCN given `∂L/∂(final output)`.
///
/// For layer `l` with `δ_l = upstream_l ⊙ (1 - out_l²)`:
/// `∂L/∂W_l = (Ã H_{l-1})ᵀ δ_l` and `upstream_{l-1} = Ã δ_l W_lᵀ`.
pub fn backprop_through_layers(
    cache: &ForwardCache,
    weights: &[LayerWeights],
    upstream: &Matrix,
    a_norm: &NormalizedAdjacency,
) -> Result<Vec<Matrix>> {
    if cache.inputs.len() != weights.len() || cache.outputs.len() != weights.len() {
        return Err(Error::shape(
            "cached layers",
            weights.len(),
            cache.inputs.len().min(cache.outputs.len()),
        ));
    }
    if upstream.raw_dim() != cache.embedding().raw_dim() {
        return Err(Error::shape(
            "upstream gradient",
            format!("{:?}", cache.embedding().dim()),
            format!("{:?}", upstream.dim()),
        ));
    }
    let mut grads = vec![Array2::zeros((0, 0)); weights.len()];
    let mut upstream = upstream.clone();
    for l in (0..weights.len()).rev() {
        let out = &cache.outputs[l];
        let input = &cache.inputs[l];
        if out.ncols() != weights[l].out_dim() || input.ncols() != weights[l].in_dim() {
            return Err(Error::shape(
                "cached layer",
                format!("{:?}", weights[l].w.dim()),
                format!("({}, {})", input.ncols(), out.ncols()),
            ));
        }
        let mut delta = upstream;
        Zip::from(&mut delta).and(out).for_each(|d, &o| *d *= 1.0 - o * o);
        // Ã is symmetric: (Ã H)ᵀ δ = Hᵀ (Ã δ)
        let a_delta = a_norm.apply(&delta);
        grads[l] = input.t().dot(&a_delta);
        upstream = a_delta.dot(&weights[l].w.t());
    }
    Ok(grads)
}

/// One bias-corrected Adam step.
pub fn adam_update(weights: &mut LayerWeights, grad: &Matrix, lr: f64) -> Result<()> {
    if grad.raw_dim() != weights.w.raw_dim() {
        return Err(Error::shape(
            "adam gradient",
            format!("{:?}", weights.w.dim()),
            format!("{:?}", grad.dim()),
        ));
    }
    if grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFinite {
            context: "adam gradient",
            epoch: weights.step_count as usize,
        });
    }
    weights.step_count += 1;
    let t = weights.step_count as i32;
    let correction1 = 1.0 - ADAM_BETA1.powi(t);
    let correction2 = 1.0 - ADAM_BETA2.powi(t);
    Zip::from(&mut weights.w)
        .and(&mut weights.first_moment)
        .and(&mut weights.second_moment)
        .and(grad)
        .for_each(|w, m, v, &g| {
            *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
            *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
            let m_hat = *m / correction1;
            let v_hat = *v / correction2;
            *w -= lr * m_hat / (v_hat.sqrt() + ADAM_EPSILON);
        });
    Ok(())
}

/// Result of comparing an analytic gradient with central differences.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub worst_index: usize,
    pub n_params: usize,
    pub tolerance: f64,
    pub passed: bool,
}

/// Denominator floor for the relative error, so entries whose true gradient
/// is ~0 are judged on absolute error instead.
pub const GRADCHECK_FLOOR: f64 = 1e-6;
pub const GRADCHECK_STEP: f64 = 1e-5;

/// Central-difference check of `analytic` against `loss` around `params`.
///
/// Relative error per entry is `|a - n| / max(|a|, |n|, GRADCHECK_FLOOR)`.
pub fn gradient_check<F>(
    mut loss: F,
    params: &[f64],
    analytic: &[f64],
    tolerance: f64,
) -> GradCheckReport
where
    F: FnMut(&[f64]) -> f64,
{
    assert_eq!(params.len(), analytic.len(), "one analytic entry per parameter");
    let mut probe = params.to_vec();
    let mut max_rel_error = 0.0f64;
    let mut worst_index = 0;
    for i in 0..params.len() {
        let original = probe[i];
        probe[i] = original + GRADCHECK_STEP;
        let plus = loss(&probe);
        probe[i] = original - GRADCHECK_STEP;
        let minus = loss(&probe);
        probe[i] = original;
        let numeric = (plus - minus) / (2.0 * GRADCHECK_STEP);
        let denom = analytic[i].abs().max(numeric.abs()).max(GRADCHECK_FLOOR);
        let rel = (analytic[i] - numeric).abs() / denom;
        if rel > max_rel_error || rel.is_nan() {
            max_rel_error = rel;
            worst_index = i;
        }
    }
    GradCheckReport {
        max_rel_error,
        worst_index,
        n_params: params.len(),
        tolerance,
        passed: max_rel_error < tolerance,
    }
}

/// Flattens a list of matrices into one parameter vector.
pub fn flatten(mats: &[Matrix]) -> Vec<f64> {
    mats.iter().flat_map(|m| m.iter().copied()).collect()
}

/// Inverse of [`flatten`] for the given shapes.
pub fn unflatten(flat: &[f64], shapes: &[(usize, usize)]) -> Vec<Matrix> {
    let mut offset = 0;
    shapes
        .iter()
        .map(|&(r, c)| {
            let m = Array2::from_shape_vec((r, c), flat[offset..offset + r * c].to_vec())
                .expect("shape covers slice");
            offset += r * c;
            m
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{modularity_matrix, normalized_adjacency, Graph};
    use ndarray::array;
    use rand::SeedableRng;

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> Matrix {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        Array2::from_shape_simple_fn((rows, cols), || rng.gen_range(-1.0..1.0))
    }

    fn random_graph(n: usize, p: f64, seed: u64) -> Graph {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut edges = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                if rng.gen_bool(p) {
                    edges.push((i, j));
                }
            }
        }
        edges.push((0, 1));
        Graph::from_edges(n, edges)
    }

    #[test]
    fn init_is_deterministic_and_bounded() {
        assert_eq!(init_weights(4, 2, 7), init_weights(4, 2, 7));
        let bound = (6.0f64 / 150.0).sqrt();
        assert!(init_weights(100, 50, 3).w.iter().all(|w| w.abs() <= bound));
        let single = init_weights(1, 1, 0);
        assert!(single.w[[0, 0]].abs() <= 3f64.sqrt());
        assert_eq!(single.first_moment[[0, 0]], 0.0);
    }

    #[test]
    fn gcn_layer_small_cases() {
        let g = random_graph(5, 0.5, 1);
        let a = normalized_adjacency(&g);
        let h = random_matrix(5, 3, 2);
        let zero = LayerWeights::from_matrix(Array2::zeros((3, 2)));
        assert!(gcn_layer_forward(&a, &h, &zero).unwrap().iter().all(|&x| x == 0.0));

        let single = normalized_adjacency(&Graph::from_edges(1, []));
        let w = LayerWeights::from_matrix(array![[0.7]]);
        let out = gcn_layer_forward(&single, &array![[0.3]], &w).unwrap();
        assert_eq!(out[[0, 0]], (0.3f64 * 0.7).tanh());

        let bad = LayerWeights::from_matrix(Array2::zeros((4, 2)));
        assert!(matches!(gcn_layer_forward(&a, &h, &bad), Err(Error::Shape { .. })));
    }

    #[test]
    fn gcn_layer_matches_triple_loop() {
        let g = random_graph(5, 0.6, 3);
        let a = normalized_adjacency(&g);
        let h = random_matrix(5, 5, 4);
        let w = LayerWeights::from_matrix(random_matrix(5, 5, 5));
        let out = gcn_layer_forward(&a, &h, &w).unwrap();
        for i in 0..5 {
            for c in 0..5 {
                let mut pre = 0.0;
                for j in 0..5 {
                    for f in 0..5 {
                        pre += a.values[[i, j]] * h[[j, f]] * w.w[[f, c]];
                    }
                }
                assert!((out[[i, c]].atanh() - pre).abs() < 1e-12);
                assert!(out[[i, c]].abs() < 1.0);
            }
        }
    }

    #[test]
    fn loss_examples() {
        let z = random_matrix(4, 2, 9);
        let exact = z.dot(&z.t());
        assert_eq!(reconstruction_loss(&z, &exact, DecoderNonlinearity::Identity).unwrap(), 0.0);
        let b = modularity_matrix(&random_graph(6, 0.5, 10)).unwrap().values;
        let zero = Array2::zeros((6, 3));
        let fro: f64 = b.iter().map(|x| x * x).sum();
        let got = reconstruction_loss(&zero, &b, DecoderNonlinearity::Identity).unwrap();
        assert!((got - fro).abs() < 1e-14);
        assert!(reconstruction_loss(&zero, &Array2::zeros((5, 5)), DecoderNonlinearity::Identity)
            .is_err());
    }

    #[test]
    fn loss_matches_double_loop() {
        let b = modularity_matrix(&random_graph(6, 0.5, 12)).unwrap().values;
        let z = random_matrix(6, 3, 13);
        for decoder in [DecoderNonlinearity::Identity, DecoderNonlinearity::Tanh] {
            let mut oracle = 0.0;
            for i in 0..6 {
                for j in 0..6 {
                    let s: f64 = (0..3).map(|c| z[[i, c]] * z[[j, c]]).sum();
                    let s = match decoder {
                        DecoderNonlinearity::Identity => s,
                        DecoderNonlinearity::Tanh => s.tanh(),
                    };
                    oracle += (s - b[[i, j]]).powi(2);
                }
            }
            let got = reconstruction_loss(&z, &b, decoder).unwrap();
            assert!((got - oracle).abs() < 1e-10);
        }
    }

    #[test]
    fn embedding_gradient_examples() {
        let z = random_matrix(5, 2, 14);
        let exact = z.dot(&z.t());
        assert!(loss_gradient_wrt_embedding(&z, &exact).unwrap().iter().all(|g| g.abs() < 1e-14));
        // d/dz (z² - b)² = 4 z (z² - b)
        let (zv, bv) = (0.8, 0.3);
        let g = loss_gradient_wrt_embedding(&array![[zv]], &array![[bv]]).unwrap();
        assert!((g[[0, 0]] - 4.0 * zv * (zv * zv - bv)).abs() < 1e-15);
    }

    #[test]
    fn embedding_gradient_matches_finite_differences() {
        let b = modularity_matrix(&random_graph(8, 0.4, 15)).unwrap().values;
        for decoder in [DecoderNonlinearity::Identity, DecoderNonlinearity::Tanh] {
            let z = random_matrix(8, 3, 16);
            let (_, grad) = reconstruction_loss_and_grad(&z, &b, decoder).unwrap();
            let report = gradient_check(
                |p| {
                    let zp = Array2::from_shape_vec((8, 3), p.to_vec()).unwrap();
                    reconstruction_loss(&zp, &b, decoder).unwrap()
                },
                z.as_slice().unwrap(),
                grad.as_slice().unwrap(),
                1e-5,
            );
            assert!(report.passed, "{decoder:?}: {report:?}");
        }
    }

    fn stacked_loss(
        a: &NormalizedAdjacency,
        input: &Matrix,
        b: &Matrix,
        shapes: &[(usize, usize)],
        flat: &[f64],
    ) -> f64 {
        let weights: Vec<_> = unflatten(flat, shapes)
            .into_iter()
            .map(LayerWeights::from_matrix)
            .collect();
        let cache = gcn_forward(a, input, &weights).unwrap();
        reconstruction_loss(cache.embedding(), b, DecoderNonlinearity::Identity).unwrap()
    }

    #[test]
    fn backprop_examples() {
        let g = random_graph(6, 0.5, 17);
        let a = normalized_adjacency(&g);
        let input = random_matrix(6, 4, 18);
        let weights = vec![
            LayerWeights::from_matrix(random_matrix(4, 3, 19)),
            LayerWeights::from_matrix(random_matrix(3, 2, 20)),
        ];
        let cache = gcn_forward(&a, &input, &weights).unwrap();
        let zero = backprop_through_layers(&cache, &weights, &Array2::zeros((6, 2)), &a).unwrap();
        assert!(zero.iter().all(|m| m.iter().all(|&x| x == 0.0)));
        assert!(backprop_through_layers(&cache, &weights, &Array2::zeros((6, 3)), &a).is_err());

        // all-zero weights: outputs are 0 so tanh' = 1 and the gradient is (ÃH)ᵀ·upstream
        let flat_w = vec![LayerWeights::from_matrix(Array2::zeros((4, 2)))];
        let cache = gcn_forward(&a, &input, &flat_w).unwrap();
        let up = random_matrix(6, 2, 21);
        let grads = backprop_through_layers(&cache, &flat_w, &up, &a).unwrap();
        let expected = a.apply(&input).t().dot(&up);
        assert!((&grads[0] - &expected).iter().all(|d| d.abs() < 1e-12));
    }

    #[test]
    fn two_layer_backprop_matches_finite_differences() {
        for seed in 0..5 {
            let g = random_graph(7, 0.4, 30 + seed);
            let a = normalized_adjacency(&g);
            let b = modularity_matrix(&g).unwrap().values;
            let shapes = [(7, 4), (4, 2)];
            let weights: Vec<_> = shapes
                .iter()
                .enumerate()
                .map(|(i, &(r, c))| LayerWeights::from_matrix(random_matrix(r, c, 40 + seed + i as u64)))
                .collect();
            let cache = gcn_forward(&a, &b, &weights).unwrap();
            let (_, up) = reconstruction_loss_and_grad(cache.embedding(), &b, DecoderNonlinearity::Identity)
                .unwrap();
            let grads = backprop_through_layers(&cache, &weights, &up, &a).unwrap();
            let params = flatten(&weights.iter().map(|w| w.w.clone()).collect::<Vec<_>>());
            let report = gradient_check(
                |p| stacked_loss(&a, &b, &b, &shapes, p),
                &params,
                &flatten(&grads),
                1e-4,
            );
            assert!(report.passed, "seed {seed}: {report:?}");
        }
    }

    #[test]
    fn adam_examples() {
        let mut w = LayerWeights::from_matrix(array![[0.5, -0.25]]);
        adam_update(&mut w, &Array2::zeros((1, 2)), 0.1).unwrap();
        assert_eq!(w.w, array![[0.5, -0.25]]);
        assert_eq!(w.step_count, 1);

        let mut s = LayerWeights::from_matrix(array![[0.0]]);
        adam_update(&mut s, &array![[1.0]], 0.1).unwrap();
        // m̂ = 1, v̂ = 1 after bias correction
        assert!((s.w[[0, 0]] + 0.1 / (1.0 + 1e-8)).abs() < 1e-15);

        let mut a = LayerWeights::from_matrix(array![[0.3]]);
        let mut b = a.clone();
        adam_update(&mut a, &array![[0.2]], 0.01).unwrap();
        adam_update(&mut b, &array![[0.2]], 0.01).unwrap();
        assert_eq!(a, b);

        assert!(matches!(
            adam_update(&mut a, &array![[f64::NAN]], 0.01),
            Err(Error::NonFinite { .. })
        ));
        assert!(adam_update(&mut a, &array![[0.1, 0.2]], 0.01).is_err());
    }

    #[test]
    fn gradient_check_detects_errors() {
        let quad = |p: &[f64]| p.iter().enumerate().map(|(i, x)| (i + 1) as f64 * x * x).sum::<f64>();
        let params = [0.3, -1.2, 2.0];
        let exact: Vec<f64> = params.iter().enumerate().map(|(i, x)| 2.0 * (i + 1) as f64 * x).collect();
        let report = gradient_check(quad, &params, &exact, 1e-9);
        assert!(report.passed, "{report:?}");
        let corrupted: Vec<f64> = exact.iter().map(|g| g * 1.1).collect();
        assert!(!gradient_check(quad, &params, &corrupted, 1e-4).passed);
    }

    #[test]
    fn config_validation() {
        assert!(TrainingConfig::default().validate().is_ok());
        let bad = TrainingConfig { layer_dims: vec![], ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = TrainingConfig { neighbor_samples: 0, ..Default::default() };
        assert!(bad.validate().is_err());
        let deep = TrainingConfig { layer_dims: vec![4; 6], ..Default::default() };
        assert!(deep.validate_depth(5).is_err());
    }
}
