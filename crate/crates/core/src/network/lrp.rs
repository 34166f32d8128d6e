use super::kernels;
use super::layer::Layer;
use super::net::{ActivationTrace, Network};
use crate::error::{Error, Result};
use crate::numerics::Tensor;

#[inline]
fn stabilize(z: f64, eps: f64) -> f64 {
    if z >= 0.0 {
        z + eps
    } else {
        z - eps
    }
}

impl Network {
    /// Propagates feature-map relevance back to the normalized input with
    /// LRP-ε through convolutions and biases, winner-take-all through max
    /// pooling and pass-through at ReLUs. The normalization layer is
    /// elementwise, so the returned `C×H×W` relevance is also the pixel-space
    /// relevance.
    pub fn relevance_backward(&self, trace: &ActivationTrace, relevance: &Tensor, eps: f64) -> Result<Tensor> {
        if trace.inputs.len() != self.layers().len() || trace.output.shape() != relevance.shape() {
            return Err(Error::InvalidState(
                "activation trace does not match this network".into(),
            ));
        }
        let shapes = self.shapes();
        let mut rel = relevance.data().to_vec();
        for l in (0..self.layers().len()).rev() {
            let (c, h, w) = shapes[l];
            let (_, oh, ow) = shapes[l + 1];
            let input = trace.inputs[l].data();
            let output = if l + 1 < trace.inputs.len() {
                trace.inputs[l + 1].data()
            } else {
                trace.output.data()
            };
            rel = match &self.layers()[l] {
                Layer::Conv2d(conv) => {
                    let s: Vec<f64> = rel
                        .iter()
                        .zip(output)
                        .map(|(&r, &z)| r / stabilize(z, eps))
                        .collect();
                    let back = kernels::conv_backward_input(conv, &s, (h, w), (oh, ow));
                    back.iter().zip(input).map(|(&b, &a)| a * b).collect()
                }
                Layer::AddBias { .. } => rel
                    .iter()
                    .zip(input.iter().zip(output))
                    .map(|(&r, (&zin, &zout))| zin * r / stabilize(zout, eps))
                    .collect(),
                Layer::Relu => rel,
                Layer::MaxPool2d { .. } => {
                    let arg = trace.argmax[l]
                        .as_ref()
                        .ok_or_else(|| Error::InvalidState(format!("missing pool indices for layer {l}")))?;
                    let mut r = vec![0.0; c * h * w];
                    for (o, &i) in arg.iter().enumerate() {
                        r[i] += rel[o];
                    }
                    r
                }
            };
        }
        let (c, h, w) = shapes[0];
        Tensor::new(vec![c, h, w], rel)
    }
}
