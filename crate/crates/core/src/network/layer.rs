use serde::{Deserialize, Serialize};

use crate::numerics::Tensor;

/// Square 2-D convolution without bias; biases live in a following
/// [`Layer::AddBias`].
#[derive(Debug, Clone, PartialEq)]
pub struct Conv2d {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
    /// `out × in × k × k`
    pub weight: Tensor,
}

impl Conv2d {
    pub fn output_size(&self, h: usize, w: usize) -> Option<(usize, usize)> {
        out_extent(h, self.kernel, self.stride, self.padding)
            .zip(out_extent(w, self.kernel, self.stride, self.padding))
    }
}

pub(crate) fn out_extent(n: usize, k: usize, s: usize, p: usize) -> Option<usize> {
    let padded = n + 2 * p;
    if s == 0 || padded < k {
        None
    } else {
        Some((padded - k) / s + 1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Layer {
    Conv2d(Conv2d),
    Relu,
    MaxPool2d { kernel: usize, stride: usize },
    AddBias { bias: Vec<f64> },
}

/// Weight-free description of a layer, used in the model file header.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum LayerKind {
    Conv2d {
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
    },
    Relu,
    MaxPool2d {
        kernel: usize,
        stride: usize,
    },
    AddBias {
        channels: usize,
    },
}

impl Layer {
    pub fn kind(&self) -> LayerKind {
        match self {
            Layer::Conv2d(c) => LayerKind::Conv2d {
                in_channels: c.in_channels,
                out_channels: c.out_channels,
                kernel: c.kernel,
                stride: c.stride,
                padding: c.padding,
            },
            Layer::Relu => LayerKind::Relu,
            Layer::MaxPool2d { kernel, stride } => LayerKind::MaxPool2d {
                kernel: *kernel,
                stride: *stride,
            },
            Layer::AddBias { bias } => LayerKind::AddBias {
                channels: bias.len(),
            },
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Layer::Conv2d(_) => "conv2d",
            Layer::Relu => "relu",
            Layer::MaxPool2d { .. } => "maxpool2d",
            Layer::AddBias { .. } => "add-bias",
        }
    }

    /// Flattened trainable parameters, if any.
    pub fn params(&self) -> Option<&[f64]> {
        match self {
            Layer::Conv2d(c) => Some(c.weight.data()),
            Layer::AddBias { bias } => Some(bias),
            _ => None,
        }
    }

    pub fn params_mut(&mut self) -> Option<&mut [f64]> {
        match self {
            Layer::Conv2d(c) => Some(c.weight.data_mut()),
            Layer::AddBias { bias } => Some(bias),
            _ => None,
        }
    }

    /// Output shape for a `c×h×w` input, or `None` if the layer cannot accept it.
    pub fn output_shape(&self, (c, h, w): (usize, usize, usize)) -> Option<(usize, usize, usize)> {
        match self {
            Layer::Conv2d(conv) => {
                if conv.in_channels != c {
                    return None;
                }
                conv.output_size(h, w).map(|(oh, ow)| (conv.out_channels, oh, ow))
            }
            Layer::Relu => Some((c, h, w)),
            Layer::MaxPool2d { kernel, stride } => out_extent(h, *kernel, *stride, 0)
                .zip(out_extent(w, *kernel, *stride, 0))
                .map(|(oh, ow)| (c, oh, ow)),
            Layer::AddBias { bias } => (bias.len() == c).then_some((c, h, w)),
        }
    }
}
