use serde::{Deserialize, Serialize};

use super::Tensor;
use crate::error::{Error, Result};

/// Boolean per-pixel mask; `true` marks a selected pixel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PixelMask {
    height: usize,
    width: usize,
    bits: Vec<bool>,
}

impl PixelMask {
    pub fn empty(height: usize, width: usize) -> Self {
        PixelMask {
            height,
            width,
            bits: vec![false; height * width],
        }
    }

    pub fn full(height: usize, width: usize) -> Self {
        PixelMask {
            height,
            width,
            bits: vec![true; height * width],
        }
    }

    pub fn from_bits(height: usize, width: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != height * width {
            return Err(Error::invalid(format!(
                "mask {}x{} needs {} bits, got {}",
                height,
                width,
                height * width,
                bits.len()
            )));
        }
        Ok(PixelMask {
            height,
            width,
            bits,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> bool {
        self.bits[r * self.width + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: bool) {
        self.bits[r * self.width + c] = v;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }
}

/// Inclusive pixel rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub top: usize,
    pub left: usize,
    pub bottom: usize,
    pub right: usize,
}

impl BoundingBox {
    pub fn height(&self) -> usize {
        self.bottom - self.top + 1
    }

    pub fn width(&self) -> usize {
        self.right - self.left + 1
    }

    pub fn area(&self) -> usize {
        self.height() * self.width()
    }

    pub fn contains(&self, r: usize, c: usize) -> bool {
        (self.top..=self.bottom).contains(&r) && (self.left..=self.right).contains(&c)
    }
}

/// `ceil(fraction * n)`, treating values within float noise of an integer as that integer.
pub fn fraction_count(fraction: f64, n: usize) -> usize {
    let raw = fraction * n as f64;
    let nearest = raw.round();
    let k = if (raw - nearest).abs() <= 1e-9 * raw.max(1.0) {
        nearest
    } else {
        raw.ceil()
    };
    (k as usize).min(n)
}

/// Pixel indices sorted by decreasing value, ties by increasing row-major index.
pub fn rank_pixels(map: &Tensor) -> Result<Vec<usize>> {
    if !map.is_finite() {
        return Err(Error::invalid("map contains non-finite values"));
    }
    let v = map.data();
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&i, &j| v[j].total_cmp(&v[i]).then(i.cmp(&j)));
    Ok(order)
}

/// Keeps the `ceil(fraction·H·W)` highest-valued pixels.
pub fn top_fraction_mask(map: &Tensor, fraction: f64) -> Result<PixelMask> {
    let (h, w) = map.dims2()?;
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::invalid(format!(
            "fraction must lie in (0, 1], got {fraction}"
        )));
    }
    let order = rank_pixels(map)?;
    Ok(mask_from_ranking(&order, fraction_count(fraction, h * w), h, w))
}

/// Mask made of the first `k` entries of a ranking.
pub fn mask_from_ranking(order: &[usize], k: usize, h: usize, w: usize) -> PixelMask {
    let mut m = PixelMask::empty(h, w);
    for &i in &order[..k.min(order.len())] {
        m.bits[i] = true;
    }
    m
}

/// How a percentile falls between two order statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PercentileMethod {
    #[default]
    Linear,
    Lower,
    Higher,
    Nearest,
}

pub fn percentile(values: &[f64], q: f64, method: PercentileMethod) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::invalid("percentile of an empty set"));
    }
    if !(q > 0.0 && q < 100.0) {
        return Err(Error::invalid(format!("percentile must lie in (0, 100), got {q}")));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q / 100.0 * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    Ok(match method {
        PercentileMethod::Linear => v[lo] + (pos - lo as f64) * (v[hi] - v[lo]),
        PercentileMethod::Lower => v[lo],
        PercentileMethod::Higher => v[hi],
        PercentileMethod::Nearest => v[pos.round() as usize],
    })
}

/// Keeps pixels at or above the `q`-th percentile of the map.
pub fn percentile_threshold_mask(map: &Tensor, q: f64, method: PercentileMethod) -> Result<PixelMask> {
    let (h, w) = map.dims2()?;
    if !map.is_finite() {
        return Err(Error::invalid("map contains non-finite values"));
    }
    let thr = percentile(map.data(), q, method)?;
    let bits = map.data().iter().map(|&v| v >= thr).collect();
    PixelMask::from_bits(h, w, bits)
}

pub fn bounding_box(mask: &PixelMask) -> Result<BoundingBox> {
    let mut bb: Option<BoundingBox> = None;
    for r in 0..mask.height {
        for c in 0..mask.width {
            if !mask.get(r, c) {
                continue;
            }
            bb = Some(match bb {
                None => BoundingBox {
                    top: r,
                    left: c,
                    bottom: r,
                    right: c,
                },
                Some(b) => BoundingBox {
                    top: b.top.min(r),
                    left: b.left.min(c),
                    bottom: b.bottom.max(r),
                    right: b.right.max(c),
                },
            });
        }
    }
    bb.ok_or_else(|| Error::EmptySelection("mask selects no pixel".into()))
}

/// Blacks out the masked pixels of a raw `3×H×W` image in every channel.
pub fn apply_deletion(image: &Tensor, delete: &PixelMask) -> Result<Tensor> {
    let (c, h, w) = image.dims3()?;
    if h != delete.height || w != delete.width {
        return Err(Error::invalid(format!(
            "mask {}x{} does not match image {}x{}",
            delete.height, delete.width, h, w
        )));
    }
    let mut out = image.clone();
    let plane = h * w;
    let data = out.data_mut();
    for (i, _) in delete.bits.iter().enumerate().filter(|(_, &b)| b) {
        for ch in 0..c {
            data[ch * plane + i] = 0.0;
        }
    }
    Ok(out)
}
