//! Small feed-forward networks over time windows with exact backpropagation.
//!
//! A [`Network`] is a validated chain of [`LayerSpec`]s evaluated on flat
//! `f64` buffers. Time windows are stored row-major, one row of channels
//! per time step. Parameters live in a single flat [`ParamSet`] so that
//! optimizers and checkpoints only ever deal with one vector.

mod gradcheck;
mod optim;

pub use gradcheck::{grad_check, GradCheck};
pub use optim::{clip_grad_norm, update, OptimizerKind, OptimizerState};

use crate::math;
use crate::{Error, Result};
use alloc::vec;
use alloc::vec::Vec;
use rand::Rng;

/// Default ε of the time-axis normalization.
pub const NORM_EPS: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum LayerSpec {
    /// Per-channel normalization over the time axis of a `window × channels`
    /// block: `(x - mean) / (eps + std)`, population std. The trailing
    /// `passthrough` inputs are copied through unchanged.
    NormTime {
        window: usize,
        channels: usize,
        eps: f64,
        passthrough: usize,
    },
    /// Valid convolution along time; output is `(window - kernel + 1) × filters`.
    Conv1dTime {
        window: usize,
        in_channels: usize,
        filters: usize,
        kernel: usize,
    },
    Dense {
        inputs: usize,
        outputs: usize,
    },
    Relu {
        size: usize,
    },
    Softmax {
        size: usize,
    },
}

impl LayerSpec {
    pub fn input_len(&self) -> usize {
        match *self {
            LayerSpec::NormTime {
                window,
                channels,
                passthrough,
                ..
            } => window * channels + passthrough,
            LayerSpec::Conv1dTime {
                window,
                in_channels,
                ..
            } => window * in_channels,
            LayerSpec::Dense { inputs, .. } => inputs,
            LayerSpec::Relu { size } | LayerSpec::Softmax { size } => size,
        }
    }

    pub fn output_len(&self) -> usize {
        match *self {
            LayerSpec::NormTime { .. } => self.input_len(),
            LayerSpec::Conv1dTime {
                window,
                filters,
                kernel,
                ..
            } => (window + 1 - kernel) * filters,
            LayerSpec::Dense { outputs, .. } => outputs,
            LayerSpec::Relu { size } | LayerSpec::Softmax { size } => size,
        }
    }

    pub fn param_count(&self) -> usize {
        match *self {
            LayerSpec::Conv1dTime {
                in_channels,
                filters,
                kernel,
                ..
            } => filters * kernel * in_channels + filters,
            LayerSpec::Dense { inputs, outputs } => inputs * outputs + outputs,
            _ => 0,
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.into()));
        match *self {
            LayerSpec::NormTime {
                window,
                channels,
                eps,
                ..
            } => {
                if window < 2 {
                    return bad("NormTime needs a window of at least 2");
                }
                if channels == 0 {
                    return bad("NormTime needs at least one channel");
                }
                if !(eps > 0.0) {
                    return bad("NormTime eps must be positive");
                }
            }
            LayerSpec::Conv1dTime {
                window,
                in_channels,
                filters,
                kernel,
            } => {
                if kernel == 0 || kernel > window || in_channels == 0 || filters == 0 {
                    return bad("invalid Conv1dTime shape");
                }
            }
            LayerSpec::Dense { inputs, outputs } => {
                if inputs == 0 || outputs == 0 {
                    return bad("invalid Dense shape");
                }
            }
            LayerSpec::Relu { size } | LayerSpec::Softmax { size } => {
                if size == 0 {
                    return bad("zero-sized activation");
                }
            }
        }
        Ok(())
    }

    /// Glorot fan-in and fan-out for parameterized layers.
    fn fans(&self) -> (usize, usize) {
        match *self {
            LayerSpec::Conv1dTime {
                in_channels,
                filters,
                kernel,
                ..
            } => (kernel * in_channels, kernel * filters),
            LayerSpec::Dense { inputs, outputs } => (inputs, outputs),
            _ => (0, 0),
        }
    }
}

/// Flat parameter vector with per-layer offsets.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamSet {
    pub values: Vec<f64>,
    /// Start of each layer's parameters in `values`.
    pub offsets: Vec<usize>,
    pub init_seed: u64,
}

impl ParamSet {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

/// Activations recorded by [`Network::forward`] for the backward pass.
#[derive(Clone, Debug)]
pub struct ForwardCache {
    /// `activations[i]` is the input of layer `i`; the last entry is the
    /// network output.
    pub activations: Vec<Vec<f64>>,
}

impl ForwardCache {
    pub fn output(&self) -> &[f64] {
        self.activations.last().map(Vec::as_slice).unwrap_or(&[])
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Network {
    layers: Vec<LayerSpec>,
    offsets: Vec<usize>,
    param_count: usize,
}

impl Network {
    pub fn new(layers: Vec<LayerSpec>) -> Result<Network> {
        if layers.is_empty() {
            return Err(Error::InvalidConfig("network has no layers".into()));
        }
        let mut offsets = Vec::with_capacity(layers.len());
        let mut total = 0;
        for (i, layer) in layers.iter().enumerate() {
            layer.validate()?;
            if i > 0 && layers[i - 1].output_len() != layer.input_len() {
                return Err(Error::ShapeMismatch {
                    expected: layers[i - 1].output_len(),
                    actual: layer.input_len(),
                });
            }
            offsets.push(total);
            total += layer.param_count();
        }
        Ok(Network {
            layers,
            offsets,
            param_count: total,
        })
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    pub fn param_count(&self) -> usize {
        self.param_count
    }

    pub fn input_len(&self) -> usize {
        self.layers[0].input_len()
    }

    pub fn output_len(&self) -> usize {
        self.layers[self.layers.len() - 1].output_len()
    }

    /// Glorot-uniform weights, zero biases. `head_gain` scales the weights
    /// of the last parameterized layer.
    pub fn init_params(&self, seed: u64, head_gain: f64) -> ParamSet {
        let mut rng = crate::rng_from_seed(seed);
        let mut values = vec![0.0; self.param_count];
        let last = self.layers.iter().rposition(|l| l.param_count() > 0);
        for (i, layer) in self.layers.iter().enumerate() {
            let n = layer.param_count();
            if n == 0 {
                continue;
            }
            let (fan_in, fan_out) = layer.fans();
            let mut bound = math::sqrt(6.0 / (fan_in + fan_out) as f64);
            if Some(i) == last {
                bound *= head_gain;
            }
            let bias = match *layer {
                LayerSpec::Conv1dTime { filters, .. } => filters,
                LayerSpec::Dense { outputs, .. } => outputs,
                _ => 0,
            };
            let start = self.offsets[i];
            for w in &mut values[start..start + n - bias] {
                *w = rng.random_range(-bound..=bound);
            }
        }
        ParamSet {
            values,
            offsets: self.offsets.clone(),
            init_seed: seed,
        }
    }

    fn check_params(&self, params: &ParamSet) -> Result<()> {
        if params.values.len() != self.param_count {
            return Err(Error::ShapeMismatch {
                expected: self.param_count,
                actual: params.values.len(),
            });
        }
        Ok(())
    }

    /// Evaluates the network and keeps every intermediate activation.
    pub fn forward(&self, params: &ParamSet, input: &[f64]) -> Result<ForwardCache> {
        self.check_params(params)?;
        if input.len() != self.input_len() {
            return Err(Error::ShapeMismatch {
                expected: self.input_len(),
                actual: input.len(),
            });
        }
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(input.to_vec());
        for (i, layer) in self.layers.iter().enumerate() {
            let p = &params.values[self.offsets[i]..self.offsets[i] + layer.param_count()];
            let x = &activations[i];
            let mut y = vec![0.0; layer.output_len()];
            forward_layer(layer, p, x, &mut y);
            activations.push(y);
        }
        Ok(ForwardCache { activations })
    }

    /// Output only.
    pub fn predict(&self, params: &ParamSet, input: &[f64]) -> Result<Vec<f64>> {
        let mut cache = self.forward(params, input)?;
        Ok(cache.activations.pop().unwrap_or_default())
    }

    /// Gradient of a scalar loss with respect to the parameters, given the
    /// loss gradient at the network output.
    pub fn backward(
        &self,
        params: &ParamSet,
        cache: &ForwardCache,
        output_grad: &[f64],
    ) -> Result<Vec<f64>> {
        let mut grads = vec![0.0; self.param_count];
        self.backward_into(params, cache, output_grad, &mut grads)?;
        Ok(grads)
    }

    /// As [`Network::backward`], accumulating into `grads`.
    pub fn backward_into(
        &self,
        params: &ParamSet,
        cache: &ForwardCache,
        output_grad: &[f64],
        grads: &mut [f64],
    ) -> Result<()> {
        self.check_params(params)?;
        if cache.activations.len() != self.layers.len() + 1 {
            return Err(Error::ShapeMismatch {
                expected: self.layers.len() + 1,
                actual: cache.activations.len(),
            });
        }
        if output_grad.len() != self.output_len() {
            return Err(Error::ShapeMismatch {
                expected: self.output_len(),
                actual: output_grad.len(),
            });
        }
        if grads.len() != self.param_count {
            return Err(Error::ShapeMismatch {
                expected: self.param_count,
                actual: grads.len(),
            });
        }
        let mut gy = output_grad.to_vec();
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let range = self.offsets[i]..self.offsets[i] + layer.param_count();
            let p = &params.values[range.clone()];
            let gp = &mut grads[range];
            let x = &cache.activations[i];
            let y = &cache.activations[i + 1];
            let mut gx = vec![0.0; layer.input_len()];
            backward_layer(layer, p, x, y, &gy, &mut gx, gp);
            gy = gx;
        }
        Ok(())
    }
}

/// Normalizes each channel of a row-major `T × C` window over time.
pub fn layer_norm_time(window: &[f64], channels: usize, eps: f64) -> Vec<f64> {
    let mut out = vec![0.0; window.len()];
    norm_time_forward(window, channels, eps, &mut out);
    out
}

fn channel_stats(x: &[f64], channels: usize, c: usize) -> (f64, f64) {
    let t = x.len() / channels;
    let mut mean = 0.0;
    for row in 0..t {
        mean += x[row * channels + c];
    }
    mean /= t as f64;
    let mut var = 0.0;
    for row in 0..t {
        let d = x[row * channels + c] - mean;
        var += d * d;
    }
    (mean, math::sqrt(var / t as f64))
}

fn norm_time_forward(x: &[f64], channels: usize, eps: f64, y: &mut [f64]) {
    let t = x.len() / channels;
    for c in 0..channels {
        let (mean, std) = channel_stats(x, channels, c);
        let scale = 1.0 / (eps + std);
        for row in 0..t {
            let k = row * channels + c;
            y[k] = (x[k] - mean) * scale;
        }
    }
}

fn norm_time_backward(x: &[f64], channels: usize, eps: f64, gy: &[f64], gx: &mut [f64]) {
    let t = x.len() / channels;
    let n = t as f64;
    for c in 0..channels {
        let (mean, std) = channel_stats(x, channels, c);
        let denom = eps + std;
        let mut sum_g = 0.0;
        let mut sum_gd = 0.0;
        for row in 0..t {
            let k = row * channels + c;
            sum_g += gy[k];
            sum_gd += gy[k] * (x[k] - mean);
        }
        // d std / d x_k = (x_k - mean) / (T std); zero when the channel is
        // constant, where every centered value vanishes as well.
        let std_term = if std > 0.0 {
            sum_gd / (denom * denom * n * std)
        } else {
            0.0
        };
        for row in 0..t {
            let k = row * channels + c;
            gx[k] = (gy[k] - sum_g / n) / denom - std_term * (x[k] - mean);
        }
    }
}

fn forward_layer(layer: &LayerSpec, p: &[f64], x: &[f64], y: &mut [f64]) {
    match *layer {
        LayerSpec::NormTime {
            window,
            channels,
            eps,
            ..
        } => {
            let body = window * channels;
            norm_time_forward(&x[..body], channels, eps, &mut y[..body]);
            y[body..].copy_from_slice(&x[body..]);
        }
        LayerSpec::Conv1dTime {
            window,
            in_channels,
            filters,
            kernel,
        } => {
            let span = kernel * in_channels;
            let (w, b) = p.split_at(filters * span);
            for t in 0..=window - kernel {
                let patch = &x[t * in_channels..t * in_channels + span];
                for f in 0..filters {
                    let wf = &w[f * span..(f + 1) * span];
                    y[t * filters + f] = b[f] + dot(wf, patch);
                }
            }
        }
        LayerSpec::Dense { inputs, outputs } => {
            let (w, b) = p.split_at(inputs * outputs);
            for (o, out) in y.iter_mut().enumerate() {
                *out = b[o] + dot(&w[o * inputs..(o + 1) * inputs], x);
            }
        }
        LayerSpec::Relu { .. } => {
            for (out, &v) in y.iter_mut().zip(x) {
                *out = if v > 0.0 { v } else { 0.0 };
            }
        }
        LayerSpec::Softmax { .. } => softmax_into(x, y),
    }
}

fn backward_layer(
    layer: &LayerSpec,
    p: &[f64],
    x: &[f64],
    y: &[f64],
    gy: &[f64],
    gx: &mut [f64],
    gp: &mut [f64],
) {
    match *layer {
        LayerSpec::NormTime {
            window,
            channels,
            eps,
            ..
        } => {
            let body = window * channels;
            norm_time_backward(&x[..body], channels, eps, &gy[..body], &mut gx[..body]);
            gx[body..].copy_from_slice(&gy[body..]);
        }
        LayerSpec::Conv1dTime {
            window,
            in_channels,
            filters,
            kernel,
        } => {
            let span = kernel * in_channels;
            let (w, _) = p.split_at(filters * span);
            let (gw, gb) = gp.split_at_mut(filters * span);
            for t in 0..=window - kernel {
                let patch = &x[t * in_channels..t * in_channels + span];
                let gpatch = &mut gx[t * in_channels..t * in_channels + span];
                for f in 0..filters {
                    let g = gy[t * filters + f];
                    if g == 0.0 {
                        continue;
                    }
                    gb[f] += g;
                    axpy(g, patch, &mut gw[f * span..(f + 1) * span]);
                    axpy(g, &w[f * span..(f + 1) * span], gpatch);
                }
            }
        }
        LayerSpec::Dense { inputs, outputs } => {
            let (w, _) = p.split_at(inputs * outputs);
            let (gw, gb) = gp.split_at_mut(inputs * outputs);
            for o in 0..outputs {
                let g = gy[o];
                if g == 0.0 {
                    continue;
                }
                gb[o] += g;
                axpy(g, x, &mut gw[o * inputs..(o + 1) * inputs]);
                axpy(g, &w[o * inputs..(o + 1) * inputs], gx);
            }
        }
        LayerSpec::Relu { .. } => {
            for ((g, &v), &d) in gx.iter_mut().zip(x).zip(gy) {
                *g = if v > 0.0 { d } else { 0.0 };
            }
        }
        LayerSpec::Softmax { .. } => {
            let inner: f64 = gy.iter().zip(y).map(|(g, p)| g * p).sum();
            for ((g, &p), &d) in gx.iter_mut().zip(y).zip(gy) {
                *g = p * (d - inner);
            }
        }
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

fn softmax_into(x: &[f64], y: &mut [f64]) {
    let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for (out, &v) in y.iter_mut().zip(x) {
        *out = math::exp(v - max);
        sum += *out;
    }
    for out in y.iter_mut() {
        *out /= sum;
    }
}

/// Softmax of a logit vector.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; logits.len()];
    softmax_into(logits, &mut y);
    y
}
