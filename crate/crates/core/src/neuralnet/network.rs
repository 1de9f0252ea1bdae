use rand::Rng;
use serde::{Deserialize, Serialize};

use super::layers::{Activation, ActivationLayer, Conv1d, Dense, GlobalAvgPool, Layer};
use crate::util::{compensated_sum, rng};
use crate::{Error, Result};

/// Lower clamp applied to the predicted probability inside the log.
pub const LOG_CLAMP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ConvBlock {
    pub filters: usize,
    pub kernel: usize,
    pub activation: Activation,
}

/// Shape of the patch network: conv blocks, global average pooling, a dense
/// head to `class_count` logits, softmax.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub input_channels: usize,
    pub input_length: usize,
    pub blocks: Vec<ConvBlock>,
    pub class_count: usize,
    pub seed: u64,
}

impl NetworkSpec {
    /// Three ReLU blocks of 32/64/64 filters with kernel 3.
    pub fn default_blocks() -> Vec<ConvBlock> {
        [32, 64, 64]
            .into_iter()
            .map(|filters| ConvBlock {
                filters,
                kernel: 3,
                activation: Activation::Relu,
            })
            .collect()
    }

    pub fn new(input_channels: usize, input_length: usize, class_count: usize, seed: u64) -> Self {
        NetworkSpec {
            input_channels,
            input_length,
            blocks: Self::default_blocks(),
            class_count,
            seed,
        }
    }

    pub fn with_filters(mut self, filters: &[usize]) -> Self {
        self.blocks = filters
            .iter()
            .map(|&filters| ConvBlock {
                filters,
                kernel: 3,
                activation: Activation::Relu,
            })
            .collect();
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_channels == 0 || self.input_length == 0 {
            return Err(Error::Config("network input dimensions must be positive".into()));
        }
        if self.class_count < 2 {
            return Err(Error::Config("network needs at least 2 classes".into()));
        }
        for b in &self.blocks {
            if b.filters == 0 || b.kernel == 0 {
                return Err(Error::Config("conv filters and kernel size must be positive".into()));
            }
            if b.kernel > self.input_length {
                return Err(Error::Config(format!(
                    "kernel size {} exceeds input length {}",
                    b.kernel, self.input_length
                )));
            }
        }
        Ok(())
    }
}

/// Per-layer gradient buffers, laid out like the layers' parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients(pub Vec<Vec<f64>>);

impl Gradients {
    pub fn zeros_like(net: &Network) -> Self {
        Gradients(net.layers.iter().map(|l| vec![0.0; l.params().len()]).collect())
    }

    pub fn fill(&mut self, v: f64) {
        for g in &mut self.0 {
            g.fill(v);
        }
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    pub fn scale(&mut self, k: f64) {
        for g in &mut self.0 {
            for x in g {
                *x *= k;
            }
        }
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.0.iter().flatten().copied().collect()
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().flatten().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Reusable activation buffers for one forward/backward pass.
#[derive(Debug, Clone)]
pub struct Workspace {
    acts: Vec<Vec<f64>>,
    grads: Vec<Vec<f64>>,
    probs: Vec<f64>,
}

impl Workspace {
    pub fn new(net: &Network) -> Self {
        let acts = net.layers.iter().map(|l| vec![0.0; l.output_len()]).collect();
        let grads = net.layers.iter().map(|l| vec![0.0; l.output_len()]).collect();
        Workspace {
            acts,
            grads,
            probs: vec![0.0; net.spec.class_count],
        }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub spec: NetworkSpec,
    pub layers: Vec<Layer>,
}

impl Network {
    /// Builds the layer stack and draws initial weights from the spec seed:
    /// conv weights uniform in `±sqrt(6 / fan_in)`, dense weights in
    /// `±sqrt(1 / fan_in)`, biases zero.
    pub fn new(spec: NetworkSpec) -> Result<Self> {
        spec.validate()?;
        let mut layers = Vec::new();
        let mut channels = spec.input_channels;
        let length = spec.input_length;
        for b in &spec.blocks {
            layers.push(Layer::Conv1d(Conv1d::new(channels, b.filters, b.kernel, length)));
            if b.activation != Activation::Identity {
                layers.push(Layer::Activation(ActivationLayer {
                    kind: b.activation,
                    size: b.filters * length,
                }));
            }
            channels = b.filters;
        }
        layers.push(Layer::GlobalAvgPool(GlobalAvgPool { channels, length }));
        layers.push(Layer::Dense(Dense::new(channels, spec.class_count)));

        let mut r = rng(spec.seed);
        for layer in &mut layers {
            let (fan_in, weight_count, gain) = match layer {
                Layer::Conv1d(c) => (c.in_channels * c.kernel, c.out_channels * c.in_channels * c.kernel, 6.0),
                Layer::Dense(d) => (d.inputs, d.inputs * d.outputs, 1.0),
                _ => continue,
            };
            let bound = (gain / fan_in as f64).sqrt();
            for w in &mut layer.params_mut()[..weight_count] {
                *w = r.random_range(-bound..bound);
            }
        }
        Ok(Network { spec, layers })
    }

    pub fn class_count(&self) -> usize {
        self.spec.class_count
    }

    pub fn input_len(&self) -> usize {
        self.spec.input_channels * self.spec.input_length
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.params().len()).sum()
    }

    /// All parameters, layer by layer.
    pub fn flat_params(&self) -> Vec<f64> {
        self.layers.iter().flat_map(|l| l.params().iter().copied()).collect()
    }

    pub fn set_flat_params(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.param_count() {
            return Err(Error::dimension(self.param_count(), values.len()));
        }
        let mut offset = 0;
        for l in &mut self.layers {
            let p = l.params_mut();
            p.copy_from_slice(&values[offset..offset + p.len()]);
            offset += p.len();
        }
        Ok(())
    }

    /// Zeroes the dense head, making every prediction uniform.
    pub fn zero_head(&mut self) {
        if let Some(Layer::Dense(d)) = self.layers.last_mut() {
            d.params.fill(0.0);
        }
    }

    pub fn check_input(&self, channels: usize, length: usize) -> Result<()> {
        if channels != self.spec.input_channels || length != self.spec.input_length {
            return Err(Error::dimension(
                format!("{}x{}", self.spec.input_channels, self.spec.input_length),
                format!("{channels}x{length}"),
            ));
        }
        Ok(())
    }

    /// Runs the layers and softmax; the probabilities land in `ws.probs`.
    pub fn forward_into(&self, input: &[f64], ws: &mut Workspace) {
        debug_assert_eq!(input.len(), self.input_len());
        for (i, layer) in self.layers.iter().enumerate() {
            let (before, rest) = ws.acts.split_at_mut(i);
            let src = if i == 0 { input } else { &before[i - 1] };
            layer.forward(src, &mut rest[0]);
        }
        softmax(ws.acts.last().expect("network has layers"), &mut ws.probs);
    }

    /// Softmax output for one input buffer of `input_channels x input_length`.
    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        if input.len() != self.input_len() {
            return Err(Error::dimension(self.input_len(), input.len()));
        }
        let mut ws = Workspace::new(self);
        self.forward_into(input, &mut ws);
        Ok(ws.probs)
    }

    /// Forward plus backward for one labeled input. Parameter gradients of
    /// the cross-entropy are added to `grads`; the loss is returned.
    pub fn accumulate_gradient(&self, input: &[f64], label: usize, ws: &mut Workspace, grads: &mut Gradients) -> f64 {
        self.forward_into(input, ws);
        let loss = cross_entropy_unchecked(&ws.probs, label);
        let n = self.layers.len();
        {
            let g = &mut ws.grads[n - 1];
            g.copy_from_slice(&ws.probs);
            g[label] -= 1.0;
        }
        for i in (0..n).rev() {
            let layer = &self.layers[i];
            let src = if i == 0 { input } else { &ws.acts[i - 1] };
            let (lower, upper) = ws.grads.split_at_mut(i);
            let grad_out = &upper[0];
            let grad_in = if i == 0 {
                None
            } else {
                Some(lower[i - 1].as_mut_slice())
            };
            layer.backward(src, &ws.acts[i], grad_out, grad_in, &mut grads.0[i]);
        }
        loss
    }

    /// Mean cross-entropy and its gradient over a batch of `(input, label)`.
    pub fn batch_gradient<'a>(&self, batch: impl IntoIterator<Item = (&'a [f64], usize)>) -> (f64, Gradients) {
        let mut ws = Workspace::new(self);
        let mut grads = Gradients::zeros_like(self);
        let mut losses = Vec::new();
        for (x, y) in batch {
            losses.push(self.accumulate_gradient(x, y, &mut ws, &mut grads));
        }
        let n = losses.len().max(1) as f64;
        grads.scale(1.0 / n);
        (compensated_sum(losses) / n, grads)
    }

    /// Mean cross-entropy over a batch, forward only.
    pub fn batch_loss<'a>(&self, batch: impl IntoIterator<Item = (&'a [f64], usize)>) -> f64 {
        let mut ws = Workspace::new(self);
        let losses: Vec<f64> = batch
            .into_iter()
            .map(|(x, y)| {
                self.forward_into(x, &mut ws);
                cross_entropy_unchecked(&ws.probs, y)
            })
            .collect();
        let n = losses.len().max(1) as f64;
        compensated_sum(losses) / n
    }
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64], out: &mut [f64]) {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for (o, &z) in out.iter_mut().zip(logits) {
        *o = (z - max).exp();
        sum += *o;
    }
    for o in out.iter_mut() {
        *o /= sum;
    }
}

fn cross_entropy_unchecked(probs: &[f64], label: usize) -> f64 {
    -probs[label].max(LOG_CLAMP).ln()
}

/// Cross-entropy of one softmax prediction against a class index.
pub fn patch_cross_entropy(prediction: &[f64], label: usize) -> Result<f64> {
    if label >= prediction.len() {
        return Err(Error::Index {
            index: label,
            limit: prediction.len(),
        });
    }
    Ok(cross_entropy_unchecked(prediction, label))
}
