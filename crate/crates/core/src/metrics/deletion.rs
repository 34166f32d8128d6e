use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::PrototypeModel;
use crate::numerics::{apply_deletion, fraction_count, mask_from_ranking, rank_pixels, Tensor};
use crate::saliency::{SaliencyMap, Target};

/// Which score goes in the numerator of the similarity ratio.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RatioOrientation {
    /// Perturbed score over original; near 0 when the deleted pixels mattered.
    #[default]
    PerturbedOverOriginal,
    /// Original score over perturbed.
    OriginalOverPerturbed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeletionConfig {
    pub a_max: f64,
    pub step: f64,
    /// Deletion range scanned for the effective receptive field.
    pub erf_scan_max: f64,
    pub erf_threshold: f64,
    /// Average over `a = 0` too when computing AUDC.
    pub include_zero: bool,
    pub orientation: RatioOrientation,
}

impl Default for DeletionConfig {
    fn default() -> Self {
        DeletionConfig {
            a_max: 0.02,
            step: 0.001,
            erf_scan_max: 0.10,
            erf_threshold: 0.2,
            include_zero: true,
            orientation: RatioOrientation::PerturbedOverOriginal,
        }
    }
}

/// Similarity ratio `τ(a)` sampled on `a = 0, step, 2·step, …`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeletionCurve {
    pub areas: Vec<f64>,
    pub ratios: Vec<f64>,
    pub a_max: f64,
    pub image_id: u64,
    pub target: Target,
}

impl DeletionCurve {
    pub fn new(areas: Vec<f64>, ratios: Vec<f64>, image_id: u64, target: Target) -> Result<Self> {
        if areas.len() != ratios.len() || areas.is_empty() {
            return Err(Error::invalid("deletion curve needs matching, non-empty samples"));
        }
        if areas[0] != 0.0 || areas.windows(2).any(|p| p[1] <= p[0]) {
            return Err(Error::invalid("deletion areas must start at 0 and increase strictly"));
        }
        let a_max = *areas.last().unwrap();
        Ok(DeletionCurve {
            areas,
            ratios,
            a_max,
            image_id,
            target,
        })
    }

    /// Leading part of the curve with `a <= a_max`.
    pub fn truncated(&self, a_max: f64) -> DeletionCurve {
        let n = self.areas.iter().take_while(|&&a| a <= a_max + 1e-12).count();
        DeletionCurve {
            areas: self.areas[..n].to_vec(),
            ratios: self.ratios[..n].to_vec(),
            a_max: self.areas[n - 1],
            image_id: self.image_id,
            target: self.target,
        }
    }
}

/// `a = k·step` for `k = 0..=round(a_max/step)`.
pub fn sample_areas(a_max: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !(a_max >= 0.0) || a_max > 1.0 {
        return Err(Error::invalid(format!("bad deletion range a_max={a_max}, step={step}")));
    }
    let n = (a_max / step).round() as usize;
    Ok((0..=n).map(|k| k as f64 * step).collect())
}

/// Deletes the most salient pixels in growing amounts and records the
/// similarity ratio at the fixed target location.
pub fn deletion_curve(
    model: &PrototypeModel,
    image_id: u64,
    image: &Tensor,
    saliency: &SaliencyMap,
    a_max: f64,
    step: f64,
    orientation: RatioOrientation,
) -> Result<DeletionCurve> {
    let target = saliency.target;
    let (_, h, w) = image.dims3()?;
    if saliency.values.shape() != [h, w] {
        return Err(Error::invalid("saliency does not match the image"));
    }
    let loc = target.location();
    let clean = model.network.features(image)?;
    let reference = model.score_at(&clean, target.prototype, loc);
    if !(reference > 0.0) {
        return Err(Error::UndefinedRatio(reference));
    }
    let areas = sample_areas(a_max, step)?;
    let order = rank_pixels(&saliency.values)?;
    let mut ratios = Vec::with_capacity(areas.len());
    let mut last: Option<(usize, f64)> = None;
    for &a in &areas {
        let k = fraction_count(a, h * w);
        let score = match last {
            Some((prev_k, s)) if prev_k == k => s,
            _ if k == 0 => reference,
            _ => {
                let mask = mask_from_ranking(&order, k, h, w);
                let deleted = apply_deletion(image, &mask)?;
                let f = model.network.features(&deleted)?;
                model.score_at(&f, target.prototype, loc)
            }
        };
        last = Some((k, score));
        ratios.push(match orientation {
            RatioOrientation::PerturbedOverOriginal => score / reference,
            RatioOrientation::OriginalOverPerturbed => reference / score,
        });
    }
    ratios[0] = 1.0;
    DeletionCurve::new(areas, ratios, image_id, target)
}

/// Mean similarity ratio over the sampled areas.
pub fn audc(curve: &DeletionCurve, include_zero: bool) -> Result<f64> {
    let skip = usize::from(!include_zero);
    let vals = &curve.ratios[skip.min(curve.ratios.len())..];
    if vals.is_empty() {
        return Err(Error::invalid("AUDC of an empty curve"));
    }
    Ok(vals.iter().sum::<f64>() / vals.len() as f64)
}

/// Smallest sampled area `<= scan_max` whose ratio falls below `threshold`.
pub fn effective_rf_area(curve: &DeletionCurve, threshold: f64, scan_max: f64) -> Option<f64> {
    curve
        .areas
        .iter()
        .zip(&curve.ratios)
        .take_while(|(&a, _)| a <= scan_max + 1e-12)
        .find(|(_, &t)| t < threshold)
        .map(|(&a, _)| a)
}
