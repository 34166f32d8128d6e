use serde::{Deserialize, Serialize};

use super::{Method, SaliencyConfig, SaliencyMap, Target};
use crate::error::Result;
use crate::model::SimilarityMap;
use crate::numerics::bicubic_upsample;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UpsampleVariant {
    /// Interpolate the whole similarity map.
    Protopnet,
    /// Keep only the target location, zero the rest, then interpolate.
    Prototree,
}

/// Similarity map interpolated to image size. Cubic overshoot below zero is
/// clipped so the result is a valid non-negative saliency map.
pub fn upsample(
    map: &SimilarityMap,
    target: Target,
    image_shape: (usize, usize),
    variant: UpsampleVariant,
    cfg: &SaliencyConfig,
) -> Result<SaliencyMap> {
    let source = match variant {
        UpsampleVariant::Protopnet => map.values.clone(),
        UpsampleVariant::Prototree => {
            let (_, w) = map.values.dims2()?;
            let keep = target.row * w + target.col;
            let mut m = map.values.map(|_| 0.0);
            m.data_mut()[keep] = map.values.data()[keep];
            m
        }
    };
    let up = bicubic_upsample(&source, image_shape, &cfg.cubic)?;
    Ok(SaliencyMap {
        values: up.map(|v| v.max(0.0)),
        method: match variant {
            UpsampleVariant::Protopnet => Method::UpsampleProtopnet,
            UpsampleVariant::Prototree => Method::UpsampleProtoTree,
        },
        target,
    })
}
