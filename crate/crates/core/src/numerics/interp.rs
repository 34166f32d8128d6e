use serde::{Deserialize, Serialize};

use super::Tensor;
use crate::error::{Error, Result};

/// Cubic convolution settings for [`bicubic_upsample`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CubicConfig {
    /// Keys kernel parameter.
    pub a: f64,
    /// Map corner pixel centers onto each other instead of pixel edges.
    pub align_corners: bool,
}

impl Default for CubicConfig {
    fn default() -> Self {
        CubicConfig {
            a: -0.75,
            align_corners: false,
        }
    }
}

/// Keys cubic convolution kernel.
#[inline]
pub fn cubic_kernel(x: f64, a: f64) -> f64 {
    let x = x.abs();
    if x <= 1.0 {
        ((a + 2.0) * x - (a + 3.0)) * x * x + 1.0
    } else if x < 2.0 {
        ((a * x - 5.0 * a) * x + 8.0 * a) * x - 4.0 * a
    } else {
        0.0
    }
}

/// Source coordinate sampled by output index `o` when resizing `n_in -> n_out`.
pub fn source_coord(o: usize, n_in: usize, n_out: usize, align_corners: bool) -> f64 {
    if align_corners {
        if n_out == 1 {
            0.0
        } else {
            (o * (n_in - 1)) as f64 / (n_out - 1) as f64
        }
    } else {
        // (o + 0.5) * n_in / n_out - 0.5, kept exact for integer factors
        ((2 * o + 1) * n_in) as f64 / (2 * n_out) as f64 - 0.5
    }
}

/// Per-output-index taps: four clamped source indices and their weights.
fn taps(n_in: usize, n_out: usize, cfg: &CubicConfig) -> Vec<([usize; 4], [f64; 4])> {
    (0..n_out)
        .map(|o| {
            let src = source_coord(o, n_in, n_out, cfg.align_corners);
            let base = src.floor();
            let t = src - base;
            let base = base as isize;
            let mut idx = [0usize; 4];
            let mut wts = [0.0; 4];
            for k in 0..4 {
                let off = k as isize - 1;
                idx[k] = (base + off).clamp(0, n_in as isize - 1) as usize;
                wts[k] = cubic_kernel(t - off as f64, cfg.a);
            }
            (idx, wts)
        })
        .collect()
}

/// Separable bicubic enlargement of an `H×W` map to `target`.
pub fn bicubic_upsample(map: &Tensor, target: (usize, usize), cfg: &CubicConfig) -> Result<Tensor> {
    let (h, w) = map.dims2()?;
    let (th, tw) = target;
    if th == 0 || tw == 0 || h == 0 || w == 0 {
        return Err(Error::invalid(format!(
            "cannot resize {}x{} to {}x{}",
            h, w, th, tw
        )));
    }
    if th < h || tw < w {
        return Err(Error::invalid(format!(
            "target {}x{} is smaller than source {}x{}",
            th, tw, h, w
        )));
    }
    let row_taps = taps(h, th, cfg);
    let col_taps = taps(w, tw, cfg);
    let src = map.data();

    // columns first: h × tw
    let mut mid = vec![0.0; h * tw];
    for r in 0..h {
        let row = &src[r * w..(r + 1) * w];
        for (c, (idx, wts)) in col_taps.iter().enumerate() {
            mid[r * tw + c] = (0..4).map(|k| wts[k] * row[idx[k]]).sum();
        }
    }
    let mut out = vec![0.0; th * tw];
    for (r, (idx, wts)) in row_taps.iter().enumerate() {
        for c in 0..tw {
            out[r * tw + c] = (0..4).map(|k| wts[k] * mid[idx[k] * tw + c]).sum();
        }
    }
    Tensor::new(vec![th, tw], out)
}
