use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::PixelMask;
use crate::saliency::PartPatch;

/// Object-membership mask of an image.
pub type SegMask = PixelMask;

pub const IRRELEVANT_BELOW: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OverlapRegion {
    /// Every pixel of the patch's bounding box.
    #[default]
    CropBox,
    /// Only the retained pixels.
    RetainedMask,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelevanceVerdict {
    pub overlap_fraction: f64,
    pub irrelevant: bool,
}

impl RelevanceVerdict {
    pub fn from_overlap(overlap_fraction: f64, threshold: f64) -> Self {
        RelevanceVerdict {
            overlap_fraction,
            irrelevant: overlap_fraction < threshold,
        }
    }
}

/// Fraction of the patch lying on the object; irrelevant below `threshold`.
pub fn relevance(patch: &PartPatch, seg: &SegMask, region: OverlapRegion, threshold: f64) -> Result<RelevanceVerdict> {
    if seg.height() != patch.mask.height() || seg.width() != patch.mask.width() {
        return Err(Error::invalid(format!(
            "segmentation {}x{} does not match image {}x{}",
            seg.height(),
            seg.width(),
            patch.mask.height(),
            patch.mask.width()
        )));
    }
    let b = patch.bbox;
    let (mut inside, mut total) = (0usize, 0usize);
    for r in b.top..=b.bottom {
        for c in b.left..=b.right {
            if region == OverlapRegion::RetainedMask && !patch.mask.get(r, c) {
                continue;
            }
            total += 1;
            if seg.get(r, c) {
                inside += 1;
            }
        }
    }
    if total == 0 {
        return Err(Error::invalid("empty patch"));
    }
    Ok(RelevanceVerdict::from_overlap(inside as f64 / total as f64, threshold))
}
