use std::path::Path;

use rayon::prelude::*;

use super::config::RunConfig;
use super::explain::{check_consistent, load_images, saliency_key};
use super::targets::{peak_targets, prototype_targets};
use crate::data::{Manifest, Split};
use crate::error::{Error, Result};
use crate::metrics::{
    aggregate_report, audc, curves_svg, deletion_curve, effective_rf_area, mean_curves, relevance, sample_areas,
    write_rows, write_samples_csv, write_tau_csv, Role, SampleResult, SummaryRow,
};
use crate::model::PrototypeModel;
use crate::numerics::Rng;
use crate::saliency::{compute, extract_patch, Method, Target};

pub const SAMPLES_FILE: &str = "samples.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const TAU_FILE: &str = "tau.csv";
pub const CURVES_FILE: &str = "curves.svg";

pub struct EvalOutput {
    pub results: Vec<SampleResult>,
    pub summary: Vec<SummaryRow>,
    /// Number of scored samples without a segmentation mask.
    pub missing_masks: usize,
}

/// Scores every (image, prototype) pair with every method: deletion curve
/// to the extended range, AUDC on its first `a_max` part, effective
/// receptive field, and relevance where a mask exists.
pub fn eval(
    model: &PrototypeModel,
    manifest: &Manifest,
    cfg: &RunConfig,
    methods: &[Method],
    out: &Path,
) -> Result<EvalOutput> {
    check_consistent(model, manifest)?;
    let geometry = model.network.input_shape();
    let mut jobs: Vec<(Role, u64, Target)> = prototype_targets(model)?
        .into_iter()
        .map(|(id, t)| (Role::Prototype, id, t))
        .collect();
    let mut test_ids: Vec<u64> = manifest.split(Split::Test).map(|e| e.id as u64).collect();
    if let Some(n) = cfg.eval.max_test_images {
        test_ids.truncate(n);
    }
    let mut ids: Vec<u64> = jobs.iter().map(|j| j.1).collect();
    ids.extend(&test_ids);
    let images = load_images(manifest, &ids, geometry)?;
    let per_image: Vec<Vec<(Role, u64, Target)>> = test_ids
        .par_iter()
        .map(|id| {
            let (_, targets) = peak_targets(model, &images[id].image.image, cfg.eval.test_patches)?;
            Ok(targets.into_iter().map(|t| (Role::TestPatch, *id, t)).collect())
        })
        .collect::<Result<_>>()?;
    jobs.extend(per_image.into_iter().flatten());

    let d = &cfg.deletion;
    let areas = sample_areas(d.erf_scan_max, d.step)?;
    let rng = Rng::new(cfg.seed);
    let tasks: Vec<(Role, u64, Target, Method)> = jobs
        .iter()
        .flat_map(|&(role, id, t)| methods.iter().map(move |&m| (role, id, t, m)))
        .collect();
    let results = tasks
        .par_iter()
        .map(|&(role, id, target, method)| {
            let sample = &images[&id];
            let image = &sample.image.image;
            let map = compute(model, image, target, method, &cfg.saliency, &rng, &saliency_key(id, target))?;
            let curve = deletion_curve(model, id, image, &map, d.erf_scan_max, d.step, d.orientation)?;
            let audc_value = audc(&curve.truncated(d.a_max), d.include_zero)?;
            let erf_area = effective_rf_area(&curve, d.erf_threshold, d.erf_scan_max);
            let verdict = match &sample.mask {
                Some(mask) => {
                    let patch = extract_patch(id, image, &map, &cfg.saliency)?;
                    Some(relevance(&patch, mask, cfg.eval.overlap_region, cfg.eval.overlap_threshold)?)
                }
                None => None,
            };
            Ok(SampleResult {
                image_id: id,
                prototype_id: target.prototype,
                method,
                role,
                audc: audc_value,
                erf_area,
                overlap_fraction: verdict.map(|v| v.overlap_fraction),
                irrelevant: verdict.map(|v| v.irrelevant),
                ratios: curve.ratios,
            })
        })
        .collect::<Result<Vec<SampleResult>>>()?;

    let missing_masks = results.iter().filter(|r| r.irrelevant.is_none()).count();
    if missing_masks > 0 {
        log::warn!("{missing_masks} scored samples have no segmentation mask; their relevance columns are empty");
    }
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let summary = aggregate_report(model.kind.name(), &results);
    write_samples_csv(&out.join(SAMPLES_FILE), &results)?;
    write_rows(&out.join(SUMMARY_FILE), &summary)?;
    write_tau_csv(&out.join(TAU_FILE), &results, &areas)?;
    let svg = curves_svg(&mean_curves(&results), &areas);
    let path = out.join(CURVES_FILE);
    std::fs::write(&path, svg).map_err(|e| Error::io(&path, e))?;
    cfg.save(out)?;
    log::info!("scored {} samples into {}", results.len(), out.display());
    Ok(EvalOutput {
        results,
        summary,
        missing_masks,
    })
}
