use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use super::targets::{prototype_targets, top_location_targets};
use crate::data::{Manifest, Split};
use crate::error::{Error, Result};
use crate::imageio::write_rgb_png;
use crate::metrics::write_rows;
use crate::model::PrototypeModel;
use crate::numerics::{Rng, Tensor};
use crate::saliency::{compute, extract_patch, overlay_png, write_saliency_png, write_saliency_raw, Method, Target};

pub const INDEX_FILE: &str = "index.csv";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scope {
    Prototypes,
    Test,
}

impl Scope {
    pub fn name(self) -> &'static str {
        match self {
            Scope::Prototypes => "prototypes",
            Scope::Test => "test",
        }
    }
}

/// One row of the artifact index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexRow {
    pub scope: Scope,
    pub image_id: u64,
    pub prototype_id: usize,
    pub row: usize,
    pub col: usize,
    pub method: Method,
    pub similarity: f64,
    pub bbox_top: usize,
    pub bbox_left: usize,
    pub bbox_bottom: usize,
    pub bbox_right: usize,
    pub patch: String,
    pub overlay: String,
    pub saliency_png: String,
    pub saliency_raw: String,
}

/// Deterministic key for the random streams of one explanation.
pub fn saliency_key(image_id: u64, target: Target) -> [u64; 4] {
    [image_id, target.prototype as u64, target.row as u64, target.col as u64]
}

/// Loads the images named by `ids` (record ids of the manifest).
pub(crate) fn load_images(
    manifest: &Manifest,
    ids: &[u64],
    geometry: (usize, usize, usize),
) -> Result<BTreeMap<u64, crate::data::Sample>> {
    let mut unique: Vec<u64> = ids.to_vec();
    unique.sort_unstable();
    unique.dedup();
    unique
        .par_iter()
        .map(|&id| {
            let entry = manifest.entries.get(id as usize).ok_or_else(|| {
                Error::input(&manifest.path, format!("model refers to image {id}, which the manifest does not have"))
            })?;
            Ok((id, manifest.load_entry(entry, geometry)?))
        })
        .collect()
}

pub(crate) fn check_consistent(model: &PrototypeModel, manifest: &Manifest) -> Result<()> {
    if model.num_classes() != manifest.classes.len() {
        return Err(Error::input(
            &manifest.path,
            format!(
                "manifest has {} classes but the model was trained on {}",
                manifest.classes.len(),
                model.num_classes()
            ),
        ));
    }
    Ok(())
}

pub struct ExplainRequest<'a> {
    pub scope: Scope,
    pub methods: &'a [Method],
    /// Restrict the test scope to these record ids.
    pub images: Option<&'a [u64]>,
    pub max_test_images: Option<usize>,
}

/// Writes crops, overlays and saliency maps for the requested scope and
/// returns the index rows (also written to `index.csv`).
pub fn explain(
    model: &PrototypeModel,
    manifest: &Manifest,
    cfg: &RunConfig,
    req: &ExplainRequest<'_>,
    out: &Path,
) -> Result<Vec<IndexRow>> {
    check_consistent(model, manifest)?;
    let geometry = model.network.input_shape();
    let jobs: Vec<(u64, Target)> = match req.scope {
        Scope::Prototypes => prototype_targets(model)?,
        Scope::Test => {
            let mut ids: Vec<u64> = match req.images {
                Some(ids) => ids.to_vec(),
                None => manifest.split(Split::Test).map(|e| e.id as u64).collect(),
            };
            if let Some(n) = req.max_test_images {
                ids.truncate(n);
            }
            let images = load_images(manifest, &ids, geometry)?;
            let per_image: Vec<Vec<(u64, Target)>> = ids
                .par_iter()
                .map(|id| {
                    let (_, targets) = top_location_targets(model, &images[id].image.image, cfg.eval.test_patches)?;
                    Ok(targets.into_iter().map(|t| (*id, t)).collect())
                })
                .collect::<Result<_>>()?;
            per_image.into_iter().flatten().collect()
        }
    };
    let ids: Vec<u64> = jobs.iter().map(|j| j.0).collect();
    let images = load_images(manifest, &ids, geometry)?;

    for sub in ["patches", "overlays", "saliency"] {
        let dir = out.join(sub);
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    }
    let rng = Rng::new(cfg.seed);
    let tasks: Vec<(u64, Target, Method)> = jobs
        .iter()
        .flat_map(|&(id, t)| req.methods.iter().map(move |&m| (id, t, m)))
        .collect();
    let rows = tasks
        .par_iter()
        .map(|&(id, target, method)| {
            let image: &Tensor = &images[&id].image.image;
            let map = compute(model, image, target, method, &cfg.saliency, &rng, &saliency_key(id, target))?;
            let patch = extract_patch(id, image, &map, &cfg.saliency)?;
            let stem = format!(
                "{}_img{id:05}_p{:03}_r{}c{}_{method}",
                req.scope.name(),
                target.prototype,
                target.row,
                target.col
            );
            let rel = |dir: &str, ext: &str| format!("{dir}/{stem}.{ext}");
            let row = IndexRow {
                scope: req.scope,
                image_id: id,
                prototype_id: target.prototype,
                row: target.row,
                col: target.col,
                method,
                similarity: model.score_at(&model.network.features(image)?, target.prototype, target.location()),
                bbox_top: patch.bbox.top,
                bbox_left: patch.bbox.left,
                bbox_bottom: patch.bbox.bottom,
                bbox_right: patch.bbox.right,
                patch: rel("patches", "png"),
                overlay: rel("overlays", "png"),
                saliency_png: rel("saliency", "png"),
                saliency_raw: rel("saliency", "raw"),
            };
            write_rgb_png(&out.join(&row.patch), &patch.crop)?;
            overlay_png(&out.join(&row.overlay), image, &map, &patch)?;
            write_saliency_png(&out.join(&row.saliency_png), &map)?;
            write_saliency_raw(&out.join(&row.saliency_raw), &map)?;
            Ok(row)
        })
        .collect::<Result<Vec<IndexRow>>>()?;
    write_rows(&out.join(INDEX_FILE), &rows)?;
    cfg.save(out)?;
    log::info!("wrote {} {} explanations to {}", rows.len(), req.scope.name(), out.display());
    Ok(rows)
}
