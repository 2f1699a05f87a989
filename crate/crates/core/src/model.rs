//! Multilayer-perceptron classifier over a flat parameter vector.
//!
//! Weights live in one `Vec<f64>` so that curvature estimates and weight
//! perturbations can treat the model as a plain vector. Layout, per layer:
//! a row-major `out x in` weight block followed by `out` biases. A network
//! with no hidden layers is softmax regression.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// Floor applied to probabilities inside logarithms. Keeps the loss and the
/// Fisher diagonal finite for saturated softmax outputs.
pub const PROB_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Relu,
    Tanh,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
        }
    }

    /// Derivative expressed through the post-activation value.
    fn derivative_from_output(self, a: f64) -> f64 {
        match self {
            Activation::Relu => {
                if a > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - a * a,
        }
    }
}

/// Shape of the classifier. Hidden sizes may be empty (softmax regression).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelArch {
    pub input_dim: usize,
    pub hidden_sizes: Vec<usize>,
    pub num_classes: usize,
    #[serde(default)]
    pub activation: Activation,
}

impl ModelArch {
    pub fn new(input_dim: usize, hidden_sizes: Vec<usize>, num_classes: usize) -> Result<Self> {
        let arch = Self {
            input_dim,
            hidden_sizes,
            num_classes,
            activation: Activation::default(),
        };
        arch.validate()?;
        Ok(arch)
    }

    pub fn with_activation(mut self, activation: Activation) -> Self {
        self.activation = activation;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 {
            return Err(Error::InvalidSpec("input_dim must be >= 1".into()));
        }
        if self.num_classes < 2 {
            return Err(Error::InvalidSpec("num_classes must be >= 2".into()));
        }
        if self.hidden_sizes.contains(&0) {
            return Err(Error::InvalidSpec("hidden sizes must be >= 1".into()));
        }
        Ok(())
    }

    /// `(fan_in, fan_out)` for each layer, input to output.
    pub fn layer_dims(&self) -> Vec<(usize, usize)> {
        let mut dims = Vec::with_capacity(self.hidden_sizes.len() + 1);
        let mut prev = self.input_dim;
        for &h in &self.hidden_sizes {
            dims.push((prev, h));
            prev = h;
        }
        dims.push((prev, self.num_classes));
        dims
    }

    /// Total number of parameters: sum of `(fan_in + 1) * fan_out`.
    pub fn param_count(&self) -> usize {
        self.layer_dims()
            .iter()
            .map(|&(i, o)| (i + 1) * o)
            .sum()
    }

    /// Stable fingerprint of the shape; stored in checkpoints and curvature
    /// dumps so they can refuse to combine with a mismatched model.
    pub fn fingerprint(&self) -> u64 {
        let canon = format!(
            "mlp:{}:{:?}:{}:{:?}",
            self.input_dim, self.hidden_sizes, self.num_classes, self.activation
        );
        rng::fnv1a64(canon.as_bytes())
    }
}

/// Flat parameter vector tied to its architecture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightVector {
    pub values: Vec<f64>,
    pub arch: ModelArch,
}

impl WeightVector {
    pub fn zeros(arch: ModelArch) -> Result<Self> {
        arch.validate()?;
        let n = arch.param_count();
        Ok(Self {
            values: vec![0.0; n],
            arch,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn check_finite(&self, context: &'static str) -> Result<()> {
        if self.values.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::NonFinite(context))
        }
    }
}

/// Deterministic fan-in-scaled initialization: weights uniform on
/// `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`, biases zero.
pub fn init_weights(arch: &ModelArch, seed: u64) -> Result<WeightVector> {
    arch.validate()?;
    let mut stream = rng::substream(seed, "init");
    let mut values = Vec::with_capacity(arch.param_count());
    for (fan_in, fan_out) in arch.layer_dims() {
        let scale = 1.0 / (fan_in as f64).sqrt();
        for _ in 0..fan_in * fan_out {
            values.push((2.0 * rng::uniform(&mut stream) - 1.0) * scale);
        }
        values.extend(std::iter::repeat_n(0.0, fan_out));
    }
    Ok(WeightVector {
        values,
        arch: arch.clone(),
    })
}

/// Per-layer views into the flat vector.
struct Layers<'a> {
    weights: &'a [f64],
    dims: Vec<(usize, usize)>,
    offsets: Vec<usize>,
}

impl<'a> Layers<'a> {
    fn new(w: &'a WeightVector) -> Self {
        let dims = w.arch.layer_dims();
        let mut offsets = Vec::with_capacity(dims.len());
        let mut off = 0;
        for &(i, o) in &dims {
            offsets.push(off);
            off += (i + 1) * o;
        }
        debug_assert_eq!(off, w.values.len());
        Self {
            weights: &w.values,
            dims,
            offsets,
        }
    }

    fn n_layers(&self) -> usize {
        self.dims.len()
    }

    /// `(weight_block, bias_block)` of layer `l`.
    fn blocks(&self, l: usize) -> (&'a [f64], &'a [f64]) {
        let (fan_in, fan_out) = self.dims[l];
        let off = self.offsets[l];
        let w = &self.weights[off..off + fan_in * fan_out];
        let b = &self.weights[off + fan_in * fan_out..off + (fan_in + 1) * fan_out];
        (w, b)
    }
}

/// Forward pass retaining post-activation values for backprop.
struct Trace {
    /// `activations[0]` is the input; `activations[l+1]` is the output of
    /// hidden layer `l`. The final logits are kept separately.
    activations: Vec<Vec<f64>>,
    logits: Vec<f64>,
}

fn forward_trace(w: &WeightVector, x: &[f64]) -> Result<Trace> {
    if x.len() != w.arch.input_dim {
        return Err(Error::DimensionMismatch {
            expected: w.arch.input_dim,
            got: x.len(),
        });
    }
    let layers = Layers::new(w);
    let n = layers.n_layers();
    let mut activations = Vec::with_capacity(n);
    activations.push(x.to_vec());
    let mut logits = Vec::new();
    for l in 0..n {
        let (fan_in, fan_out) = layers.dims[l];
        let (wb, bb) = layers.blocks(l);
        let input = activations.last().expect("nonempty");
        let mut out = Vec::with_capacity(fan_out);
        for o in 0..fan_out {
            let row = &wb[o * fan_in..(o + 1) * fan_in];
            let mut z = bb[o];
            for (wi, xi) in row.iter().zip(input.iter()) {
                z += wi * xi;
            }
            out.push(z);
        }
        if l + 1 == n {
            logits = out;
        } else {
            for z in out.iter_mut() {
                *z = w.arch.activation.apply(*z);
            }
            activations.push(out);
        }
    }
    Ok(Trace {
        activations,
        logits,
    })
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Class-probability vector for one input.
pub fn forward(w: &WeightVector, x: &[f64]) -> Result<Vec<f64>> {
    let trace = forward_trace(w, x)?;
    Ok(softmax(&trace.logits))
}

/// Backpropagate `dlogits` through the traced forward pass and add the
/// resulting parameter gradient into `grad`.
fn backprop_into(w: &WeightVector, trace: &Trace, dlogits: &[f64], grad: &mut [f64]) {
    let layers = Layers::new(w);
    let n = layers.n_layers();
    let mut delta = dlogits.to_vec();
    for l in (0..n).rev() {
        let (fan_in, fan_out) = layers.dims[l];
        let off = layers.offsets[l];
        let input = &trace.activations[l];
        // Weight and bias gradients of this layer.
        for o in 0..fan_out {
            let d = delta[o];
            let row = &mut grad[off + o * fan_in..off + (o + 1) * fan_in];
            for (g, xi) in row.iter_mut().zip(input.iter()) {
                *g += d * xi;
            }
            grad[off + fan_in * fan_out + o] += d;
        }
        if l == 0 {
            break;
        }
        // Delta for the previous layer, through the activation.
        let (wb, _) = layers.blocks(l);
        let mut prev = vec![0.0; fan_in];
        for o in 0..fan_out {
            let d = delta[o];
            let row = &wb[o * fan_in..(o + 1) * fan_in];
            for (p, wi) in prev.iter_mut().zip(row.iter()) {
                *p += d * wi;
            }
        }
        for (p, &a) in prev.iter_mut().zip(input.iter()) {
            *p *= w.arch.activation.derivative_from_output(a);
        }
        delta = prev;
    }
}

/// Mean cross-entropy loss and its gradient over a batch of
/// `(features, label)` pairs.
pub fn loss_and_grad(w: &WeightVector, batch: &[(&[f64], usize)]) -> Result<(f64, Vec<f64>)> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let classes = w.arch.num_classes;
    let mut grad = vec![0.0; w.len()];
    let mut loss = 0.0;
    for &(x, label) in batch {
        if label >= classes {
            return Err(Error::LabelOutOfRange {
                label,
                num_classes: classes,
            });
        }
        let trace = forward_trace(w, x)?;
        let probs = softmax(&trace.logits);
        loss -= probs[label].max(PROB_FLOOR).ln();
        // d(mean NLL)/dlogits for one sample, before the 1/B factor.
        let mut dlogits = probs;
        dlogits[label] -= 1.0;
        backprop_into(w, &trace, &dlogits, &mut grad);
    }
    let scale = 1.0 / batch.len() as f64;
    loss *= scale;
    for g in grad.iter_mut() {
        *g *= scale;
    }
    Ok((loss, grad))
}

/// Probabilities plus, for every class `k`, the gradient of `log p(k | x)`
/// with respect to the weights. The curvature estimator consumes this to
/// take the exact expectation over the label distribution.
pub(crate) fn class_logprob_grads(
    w: &WeightVector,
    x: &[f64],
) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let trace = forward_trace(w, x)?;
    let probs = softmax(&trace.logits);
    let classes = w.arch.num_classes;
    let mut grads = Vec::with_capacity(classes);
    for k in 0..classes {
        // d log p_k / dlogits_j = [j == k] - p_j
        let mut dlogits: Vec<f64> = probs.iter().map(|p| -p).collect();
        dlogits[k] += 1.0;
        let mut g = vec![0.0; w.len()];
        backprop_into(w, &trace, &dlogits, &mut g);
        grads.push(g);
    }
    Ok((probs, grads))
}
