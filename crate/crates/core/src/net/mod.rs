//! Fully connected feed-forward networks with exact backpropagation.
//!
//! Batches are row-major: a `B × d_in` matrix maps to `B × d_out`. Layer `l`
//! computes `a_{l+1} = act(a_l · W_lᵀ + b_l)` with `W_l` shaped
//! `d_{l+1} × d_l`; hidden layers share one activation and the last layer
//! has its own.

mod optim;
mod persist;

pub use optim::{OptimizerMethod, OptimizerState};
pub use persist::{load_mlp, save_mlp, MLP_FORMAT, MLP_FORMAT_VERSION};

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Uniform;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Hidden widths of the generator/discriminator/regressor networks.
pub const DEFAULT_HIDDEN: [usize; 4] = [128, 256, 256, 128];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Sigmoid,
    Linear,
}

impl Activation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Sigmoid => 1.0 / (1.0 + (-z).exp()),
            Activation::Linear => z,
        }
    }

    /// Derivative expressed through the activation's own output.
    #[inline]
    fn derivative_from_output(self, a: f64) -> f64 {
        match self {
            Activation::Sigmoid => a * (1.0 - a),
            Activation::Linear => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layer_dims: Vec<usize>,
    weights: Vec<Array2<f64>>,
    biases: Vec<Array1<f64>>,
    hidden_activation: Activation,
    output_activation: Activation,
}

/// Layer widths for `input → DEFAULT_HIDDEN → output`.
pub fn layer_dims(input: usize, hidden: &[usize], output: usize) -> Vec<usize> {
    let mut dims = Vec::with_capacity(hidden.len() + 2);
    dims.push(input);
    dims.extend_from_slice(hidden);
    dims.push(output);
    dims
}

fn check_dims(layer_dims: &[usize]) -> Result<()> {
    if layer_dims.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "an MLP needs at least 2 layer widths, got {layer_dims:?}"
        )));
    }
    if layer_dims.contains(&0) {
        return Err(Error::InvalidArgument(format!("zero-width layer in {layer_dims:?}")));
    }
    Ok(())
}

impl Mlp {
    /// Seeded initialization: weights uniform in ±sqrt(6 / (fan_in + fan_out)),
    /// biases zero. Sigmoid hidden units, linear output.
    pub fn new(layer_dims: &[usize], seed: u64) -> Result<Self> {
        check_dims(layer_dims)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let weights = layer_dims
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                let dist = Uniform::new_inclusive(-limit, limit).expect("finite bounds");
                Array2::from_shape_simple_fn((fan_out, fan_in), || rng.sample(dist))
            })
            .collect();
        let biases = layer_dims[1..].iter().map(|&d| Array1::zeros(d)).collect();
        Ok(Self {
            layer_dims: layer_dims.to_vec(),
            weights,
            biases,
            hidden_activation: Activation::Sigmoid,
            output_activation: Activation::Linear,
        })
    }

    pub fn zeros(layer_dims: &[usize]) -> Result<Self> {
        check_dims(layer_dims)?;
        Ok(Self {
            layer_dims: layer_dims.to_vec(),
            weights: layer_dims.windows(2).map(|w| Array2::zeros((w[1], w[0]))).collect(),
            biases: layer_dims[1..].iter().map(|&d| Array1::zeros(d)).collect(),
            hidden_activation: Activation::Sigmoid,
            output_activation: Activation::Linear,
        })
    }

    pub fn from_parts(
        layer_dims: Vec<usize>,
        weights: Vec<Array2<f64>>,
        biases: Vec<Array1<f64>>,
        hidden_activation: Activation,
        output_activation: Activation,
    ) -> Result<Self> {
        check_dims(&layer_dims)?;
        let layers = layer_dims.len() - 1;
        if weights.len() != layers || biases.len() != layers {
            return Err(Error::InvalidArgument(format!(
                "{layers} layers need {layers} weights and biases, got {} and {}",
                weights.len(),
                biases.len()
            )));
        }
        for (l, (w, b)) in weights.iter().zip(&biases).enumerate() {
            let shape = (layer_dims[l + 1], layer_dims[l]);
            if w.dim() != shape || b.len() != shape.0 {
                return Err(Error::InvalidArgument(format!(
                    "layer {l}: weight {:?} / bias {} do not match {shape:?}",
                    w.dim(),
                    b.len()
                )));
            }
            if w.iter().chain(b.iter()).any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("layer {l} parameters")));
            }
        }
        Ok(Self {
            layer_dims,
            weights,
            biases,
            hidden_activation,
            output_activation,
        })
    }

    pub fn with_activations(mut self, hidden: Activation, output: Activation) -> Self {
        self.hidden_activation = hidden;
        self.output_activation = output;
        self
    }

    pub fn layer_dims(&self) -> &[usize] {
        &self.layer_dims
    }

    pub fn input_dim(&self) -> usize {
        self.layer_dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_dims.last().unwrap()
    }

    pub fn num_layers(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[Array2<f64>] {
        &self.weights
    }

    pub fn biases(&self) -> &[Array1<f64>] {
        &self.biases
    }

    pub fn hidden_activation(&self) -> Activation {
        self.hidden_activation
    }

    pub fn output_activation(&self) -> Activation {
        self.output_activation
    }

    fn activation(&self, layer: usize) -> Activation {
        if layer + 1 == self.num_layers() {
            self.output_activation
        } else {
            self.hidden_activation
        }
    }

    pub fn param_count(&self) -> usize {
        self.weights.iter().map(Array2::len).sum::<usize>() + self.biases.iter().map(Array1::len).sum::<usize>()
    }

    /// All parameters as one vector: per layer, weights (row-major) then bias.
    pub fn flat_params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend(w.iter());
            out.extend(b.iter());
        }
        out
    }

    pub fn set_flat_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(Error::DimensionMismatch {
                expected: self.param_count(),
                actual: params.len(),
                context: "flat parameter vector",
            });
        }
        let mut it = params.iter();
        for (w, b) in self.weights.iter_mut().zip(self.biases.iter_mut()) {
            w.iter_mut().chain(b.iter_mut()).for_each(|p| *p = *it.next().unwrap());
        }
        Ok(())
    }

    pub fn forward(&self, batch: ArrayView2<'_, f64>) -> Result<ForwardCache> {
        if batch.ncols() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                actual: batch.ncols(),
                context: "forward input width",
            });
        }
        let mut activations = Vec::with_capacity(self.num_layers() + 1);
        activations.push(batch.to_owned());
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let act = self.activation(l);
            let mut z = activations[l].dot(&w.t());
            z += b;
            z.mapv_inplace(|v| act.apply(v));
            activations.push(z);
        }
        Ok(ForwardCache {
            layer_dims: self.layer_dims.clone(),
            activations,
        })
    }

    /// Forward pass without keeping the cache.
    pub fn predict(&self, batch: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        self.forward(batch).map(ForwardCache::into_output)
    }

    fn check_backward(&self, cache: &ForwardCache, output_grad: &ArrayView2<'_, f64>) -> Result<()> {
        if cache.layer_dims != self.layer_dims {
            return Err(Error::InvalidArgument(
                "cache was produced by a different architecture".into(),
            ));
        }
        let out = cache.output();
        if output_grad.dim() != out.dim() {
            return Err(Error::InvalidArgument(format!(
                "output gradient {:?} does not match output {:?}",
                output_grad.dim(),
                out.dim()
            )));
        }
        Ok(())
    }

    /// Exact gradients of a scalar loss given `dLoss/dOutput`; also returns
    /// `dLoss/dInput` so losses can be chained across networks.
    pub fn backward(&self, cache: &ForwardCache, output_grad: ArrayView2<'_, f64>) -> Result<(Gradients, Array2<f64>)> {
        self.check_backward(cache, &output_grad)?;
        let layers = self.num_layers();
        let mut weights = Vec::with_capacity(layers);
        let mut biases = Vec::with_capacity(layers);
        let input_grad = self.backpropagate(cache, output_grad, |delta, a_in| {
            weights.push(delta.t().dot(a_in));
            biases.push(delta.sum_axis(Axis(0)));
        });
        weights.reverse();
        biases.reverse();
        Ok((Gradients { weights, biases }, input_grad))
    }

    /// `dLoss/dInput` only, skipping parameter gradients.
    pub fn input_gradient(&self, cache: &ForwardCache, output_grad: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        self.check_backward(cache, &output_grad)?;
        Ok(self.backpropagate(cache, output_grad, |_, _| {}))
    }

    fn backpropagate(
        &self,
        cache: &ForwardCache,
        output_grad: ArrayView2<'_, f64>,
        mut on_layer: impl FnMut(&Array2<f64>, &Array2<f64>),
    ) -> Array2<f64> {
        let layers = self.num_layers();
        let out_act = self.activation(layers - 1);
        let mut delta = output_grad.to_owned();
        ndarray::Zip::from(&mut delta)
            .and(&cache.activations[layers])
            .for_each(|d, &a| *d *= out_act.derivative_from_output(a));
        for l in (0..layers).rev() {
            let a_in = &cache.activations[l];
            on_layer(&delta, a_in);
            let mut prev = delta.dot(&self.weights[l]);
            if l > 0 {
                let act = self.activation(l - 1);
                ndarray::Zip::from(&mut prev)
                    .and(a_in)
                    .for_each(|d, &a| *d *= act.derivative_from_output(a));
            }
            delta = prev;
        }
        delta
    }
}

/// Per-layer activations recorded by [`Mlp::forward`]; entry 0 is the input.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    layer_dims: Vec<usize>,
    activations: Vec<Array2<f64>>,
}

impl ForwardCache {
    pub fn output(&self) -> &Array2<f64> {
        self.activations.last().unwrap()
    }

    pub fn into_output(mut self) -> Array2<f64> {
        self.activations.pop().unwrap()
    }

    pub fn activations(&self) -> &[Array2<f64>] {
        &self.activations
    }
}

/// Parameter gradients shaped like the owning network.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

impl Gradients {
    pub fn zeros_like(net: &Mlp) -> Self {
        Self {
            weights: net.weights.iter().map(|w| Array2::zeros(w.raw_dim())).collect(),
            biases: net.biases.iter().map(|b| Array1::zeros(b.raw_dim())).collect(),
        }
    }

    pub fn matches(&self, net: &Mlp) -> bool {
        self.weights.len() == net.weights.len()
            && self.biases.len() == net.biases.len()
            && self.weights.iter().zip(&net.weights).all(|(g, w)| g.dim() == w.dim())
            && self.biases.iter().zip(&net.biases).all(|(g, b)| g.len() == b.len())
    }

    fn params(&self) -> impl Iterator<Item = &f64> {
        self.weights
            .iter()
            .zip(&self.biases)
            .flat_map(|(w, b)| w.iter().chain(b.iter()))
    }

    pub fn is_finite(&self) -> bool {
        self.params().all(|v| v.is_finite())
    }

    /// Same ordering as [`Mlp::flat_params`].
    pub fn flatten(&self) -> Vec<f64> {
        self.params().copied().collect()
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.weights.iter_mut().zip(&other.weights) {
            *a += b;
        }
        for (a, b) in self.biases.iter_mut().zip(&other.biases) {
            *a += b;
        }
    }

    pub fn scale(&mut self, factor: f64) {
        self.weights.iter_mut().for_each(|w| *w *= factor);
        self.biases.iter_mut().for_each(|b| *b *= factor);
    }

    pub fn is_zero(&self) -> bool {
        self.params().all(|&v| v == 0.0)
    }
}
