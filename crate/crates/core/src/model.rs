//! A small multilayer perceptron with manual forward/backward passes.
//!
//! Parameters live in one flat `f64` vector: for each consecutive layer pair
//! `(in, out)` the weight matrix (`in x out`, row-major) is followed by the
//! `out` biases. Hidden layers use a rectifier; the output layer is affine.
//! The loss is mean softmax cross-entropy in natural log, computed with
//! max-subtraction so wildly poisoned models produce large-but-ordered losses
//! instead of overflow.

use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::Rng;

use crate::datasets::Dataset;
use crate::error::{Error, Result};
use crate::seeding;

/// Hidden-layer nonlinearity. Only the rectifier is supported.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Activation {
    #[default]
    Relu,
}

/// Layer sizes `[n_features, hidden..., n_classes]` plus the hidden
/// nonlinearity.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Architecture {
    layer_sizes: Vec<usize>,
    activation: Activation,
}

impl Architecture {
    pub fn new(layer_sizes: Vec<usize>) -> Result<Self> {
        if layer_sizes.len() < 2 {
            return Err(Error::invalid_argument(
                "architecture needs at least input and output layers",
            ));
        }
        if layer_sizes.contains(&0) {
            return Err(Error::invalid_argument("layer sizes must be positive"));
        }
        Ok(Architecture {
            layer_sizes,
            activation: Activation::Relu,
        })
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn n_inputs(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn n_outputs(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    /// Total parameter count: `sum(in*out + out)` over layer pairs.
    pub fn param_count(&self) -> usize {
        self.layer_sizes
            .windows(2)
            .map(|w| w[0] * w[1] + w[1])
            .sum()
    }
}

/// A flat parameter vector bound to its architecture.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    values: Vec<f64>,
    architecture: Architecture,
}

impl ModelParams {
    pub fn new(values: Vec<f64>, architecture: Architecture) -> Result<Self> {
        if values.len() != architecture.param_count() {
            return Err(Error::invalid_argument(format!(
                "expected {} parameters for architecture {:?}, got {}",
                architecture.param_count(),
                architecture.layer_sizes(),
                values.len()
            )));
        }
        Ok(ModelParams {
            values,
            architecture,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn architecture(&self) -> &Architecture {
        &self.architecture
    }

    /// Checkpoint format: little-endian `u32` layer count, the layer sizes as
    /// `u32`, then the parameter values as `f64`.
    pub fn to_bytes(&self) -> Vec<u8> {
        let sizes = self.architecture.layer_sizes();
        let mut out = Vec::with_capacity(4 + 4 * sizes.len() + 8 * self.values.len());
        out.extend_from_slice(&(sizes.len() as u32).to_le_bytes());
        for &s in sizes {
            out.extend_from_slice(&(s as u32).to_le_bytes());
        }
        for &v in &self.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let too_short = || Error::invalid_argument("checkpoint truncated");
        if bytes.len() < 4 {
            return Err(too_short());
        }
        let n_layers = u32::from_le_bytes(bytes[..4].try_into().unwrap()) as usize;
        let header_len = 4 + 4 * n_layers;
        if bytes.len() < header_len {
            return Err(too_short());
        }
        let sizes: Vec<usize> = (0..n_layers)
            .map(|i| {
                let at = 4 + 4 * i;
                u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap()) as usize
            })
            .collect();
        let architecture = Architecture::new(sizes)?;
        let body = &bytes[header_len..];
        if body.len() != 8 * architecture.param_count() {
            return Err(Error::invalid_argument(format!(
                "checkpoint body holds {} bytes, expected {}",
                body.len(),
                8 * architecture.param_count()
            )));
        }
        let values = body
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        ModelParams::new(values, architecture)
    }

    /// Weight matrix and bias slice of layer `k`, viewed into the flat vector.
    fn layer(&self, k: usize) -> (ArrayView2<'_, f64>, &[f64]) {
        let sizes = self.architecture.layer_sizes();
        let mut offset = 0;
        for i in 0..k {
            offset += sizes[i] * sizes[i + 1] + sizes[i + 1];
        }
        let (n_in, n_out) = (sizes[k], sizes[k + 1]);
        let weights =
            ArrayView2::from_shape((n_in, n_out), &self.values[offset..offset + n_in * n_out])
                .expect("layout invariant");
        let biases = &self.values[offset + n_in * n_out..offset + n_in * n_out + n_out];
        (weights, biases)
    }

    fn n_layers(&self) -> usize {
        self.architecture.layer_sizes().len() - 1
    }
}

/// Mean loss and top-1 accuracy over a dataset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalResult {
    pub mean_loss: f64,
    pub accuracy: f64,
}

/// Initialize parameters: weights uniform in `+-1/sqrt(fan_in)`, biases zero.
pub fn init_params(architecture: &Architecture, seed: u64) -> ModelParams {
    let mut rng = seeding::rng(seed);
    let sizes = architecture.layer_sizes().to_vec();
    let mut values = Vec::with_capacity(architecture.param_count());
    for pair in sizes.windows(2) {
        let (n_in, n_out) = (pair[0], pair[1]);
        let bound = 1.0 / (n_in as f64).sqrt();
        for _ in 0..n_in * n_out {
            values.push(rng.gen_range(-bound..bound));
        }
        values.resize(values.len() + n_out, 0.0);
    }
    ModelParams::new(values, architecture.clone()).expect("counts match by construction")
}

fn check_input_width(params: &ModelParams, features: &ArrayView2<'_, f64>) -> Result<()> {
    if features.ncols() != params.architecture.n_inputs() {
        return Err(Error::invalid_argument(format!(
            "feature width {} does not match input layer size {}",
            features.ncols(),
            params.architecture.n_inputs()
        )));
    }
    Ok(())
}

/// Forward pass: affine then rectifier per hidden layer, final affine with no
/// activation. Returns `batch x n_classes` logits.
pub fn forward(params: &ModelParams, features: &Array2<f64>) -> Result<Array2<f64>> {
    check_input_width(params, &features.view())?;
    let mut activations = features.clone();
    for k in 0..params.n_layers() {
        let (weights, biases) = params.layer(k);
        let mut z = activations.dot(&weights);
        for mut row in z.rows_mut() {
            for (v, b) in row.iter_mut().zip(biases) {
                *v += b;
            }
        }
        if k + 1 < params.n_layers() {
            z.mapv_inplace(|v| v.max(0.0));
        }
        activations = z;
    }
    Ok(activations)
}

/// Row-wise stabilized log-softmax.
fn log_softmax(logits: &Array2<f64>) -> Array2<f64> {
    let mut out = logits.clone();
    for mut row in out.rows_mut() {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        row.mapv_inplace(|v| v - lse);
    }
    out
}

/// Mean softmax cross-entropy over the batch plus the full flat gradient.
pub fn loss_and_grad(
    params: &ModelParams,
    features: &Array2<f64>,
    labels: &[usize],
) -> Result<(f64, Vec<f64>)> {
    check_input_width(params, &features.view())?;
    let batch = features.nrows();
    if batch == 0 {
        return Err(Error::invalid_argument("batch must be non-empty"));
    }
    if labels.len() != batch {
        return Err(Error::invalid_argument(format!(
            "batch has {batch} rows but {} labels",
            labels.len()
        )));
    }
    let n_layers = params.n_layers();

    // Forward, caching post-activation values per layer (index 0 = input).
    let mut post: Vec<Array2<f64>> = Vec::with_capacity(n_layers + 1);
    post.push(features.clone());
    for k in 0..n_layers {
        let (weights, biases) = params.layer(k);
        let mut z = post[k].dot(&weights);
        for mut row in z.rows_mut() {
            for (v, b) in row.iter_mut().zip(biases) {
                *v += b;
            }
        }
        if k + 1 < n_layers {
            z.mapv_inplace(|v| v.max(0.0));
        }
        post.push(z);
    }

    let logits = &post[n_layers];
    let log_probs = log_softmax(logits);
    let mut loss = 0.0;
    for (i, &label) in labels.iter().enumerate() {
        loss -= log_probs[[i, label]];
    }
    loss /= batch as f64;

    // d(loss)/d(logits) = (softmax - onehot) / batch.
    let mut delta = log_probs.mapv(f64::exp);
    for (i, &label) in labels.iter().enumerate() {
        delta[[i, label]] -= 1.0;
    }
    delta.mapv_inplace(|v| v / batch as f64);

    // Backward pass, filling the flat gradient layer by layer.
    let mut grad = vec![0.0; params.values.len()];
    let sizes = params.architecture.layer_sizes();
    let layer_offset =
        |k: usize| -> usize { (0..k).map(|i| sizes[i] * sizes[i + 1] + sizes[i + 1]).sum() };
    for k in (0..n_layers).rev() {
        let inputs = &post[k];
        let d_weights = inputs.t().dot(&delta);
        let d_biases = delta.sum_axis(Axis(0));
        let offset = layer_offset(k);
        let w_len = sizes[k] * sizes[k + 1];
        for ((i, j), v) in d_weights.indexed_iter() {
            grad[offset + i * sizes[k + 1] + j] = *v;
        }
        for (j, v) in d_biases.iter().enumerate() {
            grad[offset + w_len + j] = *v;
        }
        if k > 0 {
            let (weights, _) = params.layer(k);
            let mut d_inputs = delta.dot(&weights.t());
            // Rectifier gate: post-activation zero means the unit was off.
            for (d, &a) in d_inputs.iter_mut().zip(post[k].iter()) {
                if a <= 0.0 {
                    *d = 0.0;
                }
            }
            delta = d_inputs;
        }
    }
    Ok((loss, grad))
}

/// Plain mini-batch SGD: per epoch a seeded shuffle, then `params -= lr*grad`
/// over successive mini-batches, final short batch included. The input is not
/// mutated.
pub fn local_train(
    params: &ModelParams,
    data: &Dataset,
    epochs: usize,
    batch_size: usize,
    lr: f64,
    seed: u64,
) -> Result<ModelParams> {
    if data.is_empty() {
        return Err(Error::invalid_argument("training data must be non-empty"));
    }
    if epochs == 0 {
        return Err(Error::invalid_argument("epochs must be >= 1"));
    }
    if batch_size == 0 {
        return Err(Error::invalid_argument("batch_size must be >= 1"));
    }
    if lr.is_nan() || lr < 0.0 {
        return Err(Error::invalid_argument("learning rate must be >= 0"));
    }
    let mut trained = params.clone();
    let mut rng = seeding::rng(seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    for _ in 0..epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(batch_size) {
            let batch_features = data.features().select(Axis(0), chunk);
            let batch_labels: Vec<usize> = chunk.iter().map(|&i| data.labels()[i]).collect();
            let (_, grad) = loss_and_grad(&trained, &batch_features, &batch_labels)?;
            for (v, g) in trained.values.iter_mut().zip(&grad) {
                *v -= lr * g;
            }
        }
    }
    Ok(trained)
}

/// Full-batch mean cross-entropy and top-1 accuracy; argmax ties go to the
/// lowest class index.
pub fn evaluate(params: &ModelParams, data: &Dataset) -> Result<EvalResult> {
    if data.is_empty() {
        return Err(Error::invalid_argument("evaluation data must be non-empty"));
    }
    let logits = forward(params, data.features())?;
    let log_probs = log_softmax(&logits);
    let mut loss = 0.0;
    let mut correct = 0usize;
    for (i, &label) in data.labels().iter().enumerate() {
        loss -= log_probs[[i, label]];
        if argmax_lowest(logits.row(i).as_slice().expect("contiguous row")) == label {
            correct += 1;
        }
    }
    Ok(EvalResult {
        mean_loss: loss / data.len() as f64,
        accuracy: correct as f64 / data.len() as f64,
    })
}

/// Index of the maximum value; the lowest index wins ties.
pub fn argmax_lowest(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}
