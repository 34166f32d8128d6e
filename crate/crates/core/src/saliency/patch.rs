use super::{Method, SaliencyConfig, SaliencyMap};
use crate::error::{Error, Result};
use crate::numerics::{bounding_box, percentile_threshold_mask, top_fraction_mask, BoundingBox, PixelMask, Tensor};

/// A visualised image part: retained pixels, their bounding box and the crop.
#[derive(Debug, Clone, PartialEq)]
pub struct PartPatch {
    pub image_id: u64,
    pub method: Method,
    pub mask: PixelMask,
    pub bbox: BoundingBox,
    /// `3 × box height × box width`.
    pub crop: Tensor,
}

/// Keeps the most salient pixels and crops the image to their bounding box.
///
/// The whole-map upsampling variant keeps pixels above the configured
/// percentile; every other method keeps the top fraction of pixels.
pub fn extract_patch(image_id: u64, image: &Tensor, saliency: &SaliencyMap, cfg: &SaliencyConfig) -> Result<PartPatch> {
    let (c, h, w) = image.dims3()?;
    if saliency.values.shape() != [h, w] {
        return Err(Error::invalid(format!(
            "saliency {:?} does not match image {}x{}",
            saliency.values.shape(),
            h,
            w
        )));
    }
    let mask = match saliency.method {
        Method::UpsampleProtopnet => percentile_threshold_mask(&saliency.values, cfg.percentile, cfg.percentile_method)?,
        _ => top_fraction_mask(&saliency.values, cfg.top_fraction)?,
    };
    let bbox = bounding_box(&mask)?;
    let crop = crop(image, &bbox, c);
    Ok(PartPatch {
        image_id,
        method: saliency.method,
        mask,
        bbox,
        crop,
    })
}

fn crop(image: &Tensor, b: &BoundingBox, channels: usize) -> Tensor {
    let (bh, bw) = (b.height(), b.width());
    Tensor::from_fn(&[channels, bh, bw], |i| {
        let ch = i / (bh * bw);
        let r = (i / bw) % bh;
        let col = i % bw;
        image.at3(ch, b.top + r, b.left + col)
    })
}
