use super::layer::Layer;
use super::net::Network;
use crate::error::Result;
use crate::numerics::BoundingBox;

/// Analytic receptive field of every feature-map location.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReceptiveField {
    /// Unclipped side length in input pixels.
    pub size: usize,
    /// Input-pixel distance between neighbouring output locations.
    pub jump: usize,
    /// Input coordinate of the first pixel seen by output location 0
    /// (negative when it reaches into the padding).
    pub offset: isize,
    pub input: (usize, usize),
    pub output: (usize, usize),
}

impl ReceptiveField {
    /// Input region of output location `(h, w)`, clipped to the image.
    pub fn region(&self, h: usize, w: usize) -> BoundingBox {
        let clip = |o: usize, n: usize| {
            let lo = self.offset + (o * self.jump) as isize;
            let hi = lo + self.size as isize - 1;
            (lo.max(0) as usize, (hi.min(n as isize - 1)).max(0) as usize)
        };
        let (top, bottom) = clip(h, self.input.0);
        let (left, right) = clip(w, self.input.1);
        BoundingBox {
            top,
            left,
            bottom,
            right,
        }
    }

    /// Center of the unclipped region, in input pixel coordinates.
    pub fn center(&self, h: usize, w: usize) -> (f64, f64) {
        let c = |o: usize| self.offset as f64 + (o * self.jump) as f64 + (self.size as f64 - 1.0) / 2.0;
        (c(h), c(w))
    }

    /// Clipped `(height, width)` of the region.
    pub fn extent(&self, h: usize, w: usize) -> (usize, usize) {
        let r = self.region(h, w);
        (r.height(), r.width())
    }

    /// Fraction of the image covered by the clipped region.
    pub fn area_fraction(&self, h: usize, w: usize) -> f64 {
        self.region(h, w).area() as f64 / (self.input.0 * self.input.1) as f64
    }
}

pub fn analytic_receptive_field(net: &Network) -> Result<ReceptiveField> {
    let mut size = 1usize;
    let mut jump = 1usize;
    let mut offset = 0isize;
    for layer in net.layers() {
        let (k, s, p) = match layer {
            Layer::Conv2d(c) => (c.kernel, c.stride, c.padding),
            Layer::MaxPool2d { kernel, stride } => (*kernel, *stride, 0),
            Layer::Relu | Layer::AddBias { .. } => continue,
        };
        size += (k - 1) * jump;
        offset -= (p * jump) as isize;
        jump *= s;
    }
    let (_, ih, iw) = net.input_shape();
    let (_, oh, ow) = net.output_dims();
    Ok(ReceptiveField {
        size,
        jump,
        offset,
        input: (ih, iw),
        output: (oh, ow),
    })
}
