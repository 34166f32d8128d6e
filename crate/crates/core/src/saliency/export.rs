use std::path::Path;

use super::{PartPatch, SaliencyMap};
use crate::error::{Error, Result};
use crate::imageio::{write_gray16_png, write_rgb_png};
use crate::numerics::Tensor;

const RAW_MAGIC: &[u8; 8] = b"PSALRAW1";

/// 16-bit grayscale PNG of the map scaled by its maximum.
pub fn write_saliency_png(path: &Path, saliency: &SaliencyMap) -> Result<()> {
    let max = saliency.values.max();
    let scaled = if max > 0.0 {
        saliency.values.scale(1.0 / max)
    } else {
        saliency.values.clone()
    };
    write_gray16_png(path, &scaled)
}

/// Exact float sidecar: magic, `u32` height and width, then `f64` values,
/// all little-endian.
pub fn write_saliency_raw(path: &Path, saliency: &SaliencyMap) -> Result<()> {
    let (h, w) = saliency.values.dims2()?;
    let mut buf = Vec::with_capacity(16 + 8 * h * w);
    buf.extend_from_slice(RAW_MAGIC);
    buf.extend_from_slice(&(h as u32).to_le_bytes());
    buf.extend_from_slice(&(w as u32).to_le_bytes());
    for v in saliency.values.data() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    std::fs::write(path, buf).map_err(|e| Error::io(path, e))
}

pub fn read_saliency_raw(path: &Path) -> Result<Tensor> {
    let buf = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if buf.len() < 16 || &buf[..8] != RAW_MAGIC {
        return Err(Error::Format(format!("{}: not a saliency sidecar", path.display())));
    }
    let h = u32::from_le_bytes(buf[8..12].try_into().unwrap()) as usize;
    let w = u32::from_le_bytes(buf[12..16].try_into().unwrap()) as usize;
    if buf.len() != 16 + 8 * h * w {
        return Err(Error::Truncated(format!("{}: wrong payload size", path.display())));
    }
    let data = buf[16..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Tensor::new(vec![h, w], data)
}

/// Saliency alpha-blended in red over the image, crop box outlined in yellow.
pub fn overlay_png(path: &Path, image: &Tensor, saliency: &SaliencyMap, patch: &PartPatch) -> Result<()> {
    let (_, h, w) = image.dims3()?;
    let max = saliency.values.max();
    let plane = h * w;
    let mut out = image.clone();
    let d = out.data_mut();
    for i in 0..plane {
        let alpha = if max > 0.0 { 0.6 * saliency.values.data()[i] / max } else { 0.0 };
        let tint = [1.0, 0.0, 0.0];
        for (ch, t) in tint.iter().enumerate() {
            let v = &mut d[ch * plane + i];
            *v = (1.0 - alpha) * *v + alpha * t;
        }
    }
    let b = patch.bbox;
    for r in b.top..=b.bottom {
        for c in b.left..=b.right {
            if r == b.top || r == b.bottom || c == b.left || c == b.right {
                let i = r * w + c;
                d[i] = 1.0;
                d[plane + i] = 1.0;
                d[2 * plane + i] = 0.0;
            }
        }
    }
    write_rgb_png(path, &out)
}
