//! Which (image, prototype, location) triples get explained or scored.

use crate::error::{Error, Result};
use crate::model::{peak, PrototypeModel};
use crate::numerics::Tensor;
use crate::saliency::Target;

/// Every prototype at its projected source location, paired with the id of
/// the training image it was projected onto.
pub fn prototype_targets(model: &PrototypeModel) -> Result<Vec<(u64, Target)>> {
    model
        .prototypes
        .iter()
        .map(|p| {
            let src = p.source.ok_or_else(|| {
                Error::InvalidState(format!("prototype {} has not been projected onto a training image", p.index))
            })?;
            Ok((
                src.image_id,
                Target {
                    prototype: p.index,
                    row: src.row,
                    col: src.col,
                },
            ))
        })
        .collect()
}

fn class_prototypes(model: &PrototypeModel, class: usize) -> Vec<usize> {
    model
        .prototypes
        .iter()
        .filter(|p| p.class == Some(class))
        .map(|p| p.index)
        .collect()
}

fn take_best(mut scored: Vec<(f64, Target)>, k: usize) -> Vec<Target> {
    // stable: ties keep (prototype, row-major) order
    scored.sort_by(|a, b| b.0.total_cmp(&a.0));
    scored.into_iter().take(k).map(|(_, t)| t).collect()
}

/// The `k` most similar (prototype, location) pairs among the prototypes of
/// the predicted class.
pub fn top_location_targets(model: &PrototypeModel, image: &Tensor, k: usize) -> Result<(usize, Vec<Target>)> {
    let features = model.network.features(image)?;
    let class = model.predict_features(&features)?.class();
    let mut scored = Vec::new();
    for j in class_prototypes(model, class) {
        let map = model.similarity_map(&features, j)?;
        let (h, w) = map.values.dims2()?;
        for row in 0..h {
            for col in 0..w {
                scored.push((map.values.at2(row, col), Target { prototype: j, row, col }));
            }
        }
    }
    Ok((class, take_best(scored, k)))
}

/// Up to `k` prototypes of the predicted class, each at its own peak,
/// ranked by peak similarity.
pub fn peak_targets(model: &PrototypeModel, image: &Tensor, k: usize) -> Result<(usize, Vec<Target>)> {
    let features = model.network.features(image)?;
    let class = model.predict_features(&features)?.class();
    let mut scored = Vec::new();
    for j in class_prototypes(model, class) {
        let p = peak(&model.similarity_map(&features, j)?);
        scored.push((
            p.score,
            Target {
                prototype: j,
                row: p.row,
                col: p.col,
            },
        ));
    }
    Ok((class, take_best(scored, k)))
}
