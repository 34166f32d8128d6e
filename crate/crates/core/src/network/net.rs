use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::kernels;
use super::layer::{Conv2d, Layer, LayerKind};
use crate::error::{Error, Result};
use crate::numerics::{Rng, Tensor};

/// Per-channel `(x - mean) / std` applied to raw images before layer 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Normalization {
    pub fn identity(channels: usize) -> Self {
        Normalization {
            mean: vec![0.0; channels],
            std: vec![1.0; channels],
        }
    }
}

/// Geometry of the default feature extractor: `blocks` of conv3×3 + ReLU +
/// maxpool2×2, one block per entry of `channels`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub input_channels: usize,
    pub input_size: usize,
    pub channels: Vec<usize>,
    pub kernel: usize,
    pub bias: bool,
    pub normalization: Normalization,
    /// Multiplier on the He-normal init std of the last convolution; scales
    /// the output features.
    pub output_gain: f64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        NetworkConfig {
            input_channels: 3,
            input_size: 32,
            channels: vec![8, 16, 32],
            kernel: 3,
            bias: true,
            normalization: Normalization {
                mean: vec![0.5; 3],
                std: vec![0.25; 3],
            },
            output_gain: 0.1,
        }
    }
}

/// Weight-free header of a [`Network`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkHeader {
    pub input: (usize, usize, usize),
    pub normalization: Normalization,
    pub layers: Vec<LayerKind>,
}

/// Fully convolutional feature extractor `f`.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    input: (usize, usize, usize),
    normalization: Normalization,
    layers: Vec<Layer>,
    shapes: Vec<(usize, usize, usize)>,
}

/// Intermediates cached by [`Network::forward`].
#[derive(Debug, Clone)]
pub struct ActivationTrace {
    fingerprint: u64,
    /// `inputs[l]` is the input of layer `l`; `inputs[0]` is the normalized image.
    pub inputs: Vec<Tensor>,
    /// Winner indices for every maxpool layer.
    pub argmax: Vec<Option<Vec<usize>>>,
    pub output: Tensor,
}

impl ActivationTrace {
    pub fn layer_count(&self) -> usize {
        self.inputs.len()
    }

    pub fn normalized_input(&self) -> &Tensor {
        &self.inputs[0]
    }
}

/// Gradients produced by one backward sweep.
#[derive(Debug, Clone)]
pub struct Gradients {
    /// Gradient w.r.t. the normalized image.
    pub normalized_input: Tensor,
    /// Gradient w.r.t. the raw image.
    pub input: Tensor,
    /// Per-layer parameter gradients, `None` for parameter-free layers.
    pub params: Option<Vec<Option<Vec<f64>>>>,
}

fn fnv_mix(h: u64, v: u64) -> u64 {
    let mut h = h;
    for b in v.to_le_bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

impl Network {
    pub fn new(
        input: (usize, usize, usize),
        normalization: Normalization,
        layers: Vec<Layer>,
    ) -> Result<Self> {
        if normalization.mean.len() != input.0 || normalization.std.len() != input.0 {
            return Err(Error::invalid("normalization must have one entry per input channel"));
        }
        if normalization.std.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
            return Err(Error::invalid("normalization std must be strictly positive"));
        }
        let mut shapes = vec![input];
        for (i, layer) in layers.iter().enumerate() {
            if let Layer::Conv2d(c) = layer {
                if c.weight.shape() != [c.out_channels, c.in_channels, c.kernel, c.kernel] {
                    return Err(Error::invalid(format!("layer {i}: weight shape mismatch")));
                }
                if c.stride == 0 || c.kernel == 0 {
                    return Err(Error::invalid(format!("layer {i}: zero kernel or stride")));
                }
            }
            if let Layer::MaxPool2d { kernel, stride } = layer {
                if *kernel == 0 || *stride == 0 {
                    return Err(Error::invalid(format!("layer {i}: zero kernel or stride")));
                }
            }
            if layer.params().is_some_and(|p| p.iter().any(|v| !v.is_finite())) {
                return Err(Error::invalid(format!("layer {i}: non-finite weights")));
            }
            let last = *shapes.last().unwrap();
            let next = layer.output_shape(last).ok_or_else(|| {
                Error::invalid(format!(
                    "layer {i} ({}) cannot take input {:?}",
                    layer.name(),
                    last
                ))
            })?;
            shapes.push(next);
        }
        Ok(Network {
            input,
            normalization,
            layers,
            shapes,
        })
    }

    /// Randomly initialized network from `cfg` (He-normal weights, zero biases).
    pub fn from_config(cfg: &NetworkConfig, rng: &Rng) -> Result<Self> {
        let mut stream = rng.stream("network-init", &[]);
        let mut layers = Vec::new();
        let mut cin = cfg.input_channels;
        if !(cfg.output_gain.is_finite() && cfg.output_gain > 0.0) {
            return Err(Error::invalid(format!("output gain must be positive, got {}", cfg.output_gain)));
        }
        for (b, &cout) in cfg.channels.iter().enumerate() {
            let fan_in = (cin * cfg.kernel * cfg.kernel) as f64;
            let gain = if b + 1 == cfg.channels.len() { cfg.output_gain } else { 1.0 };
            let normal = Normal::new(0.0, gain * (2.0 / fan_in).sqrt()).expect("valid std");
            let weight = Tensor::from_fn(&[cout, cin, cfg.kernel, cfg.kernel], |_| {
                normal.sample(&mut stream)
            });
            layers.push(Layer::Conv2d(Conv2d {
                in_channels: cin,
                out_channels: cout,
                kernel: cfg.kernel,
                stride: 1,
                padding: cfg.kernel / 2,
                weight,
            }));
            if cfg.bias {
                layers.push(Layer::AddBias {
                    bias: vec![0.0; cout],
                });
            }
            layers.push(Layer::Relu);
            layers.push(Layer::MaxPool2d {
                kernel: 2,
                stride: 2,
            });
            cin = cout;
        }
        Network::new(
            (cfg.input_channels, cfg.input_size, cfg.input_size),
            cfg.normalization.clone(),
            layers,
        )
    }

    pub fn header(&self) -> NetworkHeader {
        NetworkHeader {
            input: self.input,
            normalization: self.normalization.clone(),
            layers: self.layers.iter().map(Layer::kind).collect(),
        }
    }

    pub fn input_shape(&self) -> (usize, usize, usize) {
        self.input
    }

    /// `(D, H, W)` of the feature map.
    pub fn output_dims(&self) -> (usize, usize, usize) {
        *self.shapes.last().unwrap()
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn normalization(&self) -> &Normalization {
        &self.normalization
    }

    /// Input shape of every layer followed by the output shape.
    pub fn shapes(&self) -> &[(usize, usize, usize)] {
        &self.shapes
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().filter_map(Layer::params).map(<[f64]>::len).sum()
    }

    /// Hash of architecture and parameter bits, used to reject stale traces.
    pub fn fingerprint(&self) -> u64 {
        let mut h = 0xcbf2_9ce4_8422_2325u64;
        h = fnv_mix(h, self.layers.len() as u64);
        for (i, layer) in self.layers.iter().enumerate() {
            h = fnv_mix(h, i as u64);
            h = fnv_mix(h, self.shapes[i + 1].0 as u64);
            if let Some(p) = layer.params() {
                for v in p {
                    h = fnv_mix(h, v.to_bits());
                }
            }
        }
        for v in self.normalization.mean.iter().chain(&self.normalization.std) {
            h = fnv_mix(h, v.to_bits());
        }
        h
    }

    pub fn normalize(&self, x: &Tensor) -> Result<Tensor> {
        let (c, h, w) = x.dims3()?;
        if (c, h, w) != self.input {
            return Err(Error::invalid(format!(
                "image shape {:?} does not match network input {:?}",
                x.shape(),
                self.input
            )));
        }
        let plane = h * w;
        let mut out = x.clone();
        for (i, v) in out.data_mut().iter_mut().enumerate() {
            let ch = i / plane;
            *v = (*v - self.normalization.mean[ch]) / self.normalization.std[ch];
        }
        Ok(out)
    }

    /// Runs `f(x)` on a raw image and keeps every intermediate.
    pub fn forward(&self, x: &Tensor) -> Result<(Tensor, ActivationTrace)> {
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut argmax = Vec::with_capacity(self.layers.len());
        let mut cur = self.normalize(x)?;
        for (l, layer) in self.layers.iter().enumerate() {
            let (c, h, w) = self.shapes[l];
            let (oc, oh, ow) = self.shapes[l + 1];
            let (next, arg) = match layer {
                Layer::Conv2d(conv) => (kernels::conv_forward(conv, cur.data(), (h, w), (oh, ow)), None),
                Layer::Relu => (cur.data().iter().map(|&v| v.max(0.0)).collect(), None),
                Layer::MaxPool2d { kernel, stride } => {
                    let (o, a) = kernels::maxpool_forward(cur.data(), (c, h, w), (oh, ow), *kernel, *stride);
                    (o, Some(a))
                }
                Layer::AddBias { bias } => {
                    let plane = h * w;
                    let d = cur.data().iter().enumerate().map(|(i, &v)| v + bias[i / plane]).collect();
                    (d, None)
                }
            };
            inputs.push(cur);
            argmax.push(arg);
            cur = Tensor::new(vec![oc, oh, ow], next)?;
        }
        let trace = ActivationTrace {
            fingerprint: self.fingerprint(),
            inputs,
            argmax,
            output: cur.clone(),
        };
        Ok((cur, trace))
    }

    /// Features only.
    pub fn features(&self, x: &Tensor) -> Result<Tensor> {
        Ok(self.forward(x)?.0)
    }

    fn check_trace(&self, trace: &ActivationTrace, seed: &Tensor) -> Result<()> {
        if trace.inputs.len() != self.layers.len() || trace.fingerprint != self.fingerprint() {
            return Err(Error::InvalidState(
                "activation trace was not produced by this network".into(),
            ));
        }
        let (d, h, w) = self.output_dims();
        if seed.shape() != [d, h, w] {
            return Err(Error::invalid(format!(
                "seed gradient shape {:?} does not match features {:?}",
                seed.shape(),
                (d, h, w)
            )));
        }
        Ok(())
    }

    /// Reverse-mode sweep of `<features, seed>`.
    pub fn backward(&self, trace: &ActivationTrace, seed: &Tensor, with_params: bool) -> Result<Gradients> {
        self.check_trace(trace, seed)?;
        let mut grad = seed.data().to_vec();
        let mut params: Vec<Option<Vec<f64>>> = vec![None; self.layers.len()];
        for l in (0..self.layers.len()).rev() {
            let (c, h, w) = self.shapes[l];
            let (_, oh, ow) = self.shapes[l + 1];
            let input = &trace.inputs[l];
            grad = match &self.layers[l] {
                Layer::Conv2d(conv) => {
                    if with_params {
                        params[l] = Some(kernels::conv_backward_weight(conv, input.data(), &grad, (h, w), (oh, ow)));
                    }
                    kernels::conv_backward_input(conv, &grad, (h, w), (oh, ow))
                }
                Layer::Relu => grad
                    .iter()
                    .zip(input.data())
                    .map(|(&g, &v)| if v > 0.0 { g } else { 0.0 })
                    .collect(),
                Layer::MaxPool2d { .. } => {
                    let arg = trace.argmax[l].as_ref().ok_or_else(|| {
                        Error::InvalidState(format!("missing pool indices for layer {l}"))
                    })?;
                    let mut g = vec![0.0; c * h * w];
                    for (o, &i) in arg.iter().enumerate() {
                        g[i] += grad[o];
                    }
                    g
                }
                Layer::AddBias { bias } => {
                    if with_params {
                        let plane = h * w;
                        let mut gb = vec![0.0; bias.len()];
                        for (i, &g) in grad.iter().enumerate() {
                            gb[i / plane] += g;
                        }
                        params[l] = Some(gb);
                    }
                    grad
                }
            };
        }
        let normalized_input = Tensor::new(vec![self.input.0, self.input.1, self.input.2], grad)?;
        let plane = self.input.1 * self.input.2;
        let mut raw = normalized_input.clone();
        for (i, v) in raw.data_mut().iter_mut().enumerate() {
            *v /= self.normalization.std[i / plane];
        }
        Ok(Gradients {
            normalized_input,
            input: raw,
            params: with_params.then_some(params),
        })
    }

    /// Gradient of `<f(x), seed>` w.r.t. the raw image.
    pub fn input_gradient(&self, trace: &ActivationTrace, seed: &Tensor) -> Result<Tensor> {
        Ok(self.backward(trace, seed, false)?.input)
    }

    /// Gradients of `<f(x), seed>` w.r.t. every layer's parameters.
    pub fn parameter_gradients(&self, trace: &ActivationTrace, seed: &Tensor) -> Result<Vec<Option<Vec<f64>>>> {
        Ok(self.backward(trace, seed, true)?.params.expect("requested"))
    }
}
