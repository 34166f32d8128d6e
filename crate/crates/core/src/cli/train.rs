use std::path::{Path, PathBuf};

use serde::Serialize;

use super::config::RunConfig;
use crate::data::{Manifest, Split};
use crate::error::{Error, Result};
use crate::metrics::write_rows;
use crate::model::{accuracy, train_toy, LabeledImage, PrototypeModel};
use crate::network::{save_model, Network};
use crate::numerics::Rng;

pub const MODEL_FILE: &str = "model.psan";
pub const TRAIN_LOG_FILE: &str = "train_log.csv";
pub const TRAIN_SUMMARY_FILE: &str = "train_summary.json";

#[derive(Debug, Clone, Serialize)]
struct EpochRow {
    epoch: usize,
    loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct TrainSummary {
    pub similarity: String,
    pub classes: Vec<String>,
    pub prototypes: usize,
    pub train_images: usize,
    pub test_images: usize,
    pub final_loss: Option<f64>,
    pub train_accuracy: f64,
    pub test_accuracy: Option<f64>,
}

pub struct TrainOutput {
    pub model_path: PathBuf,
    pub summary: TrainSummary,
}

/// Trains, projects and saves a model from the train split of a manifest,
/// then scores the test split.
pub fn train(manifest_path: &Path, cfg: &RunConfig, out: &Path) -> Result<TrainOutput> {
    let manifest = Manifest::load(manifest_path)?;
    let geometry = (cfg.network.input_channels, cfg.network.input_size, cfg.network.input_size);
    let to_images = |split| -> Result<Vec<LabeledImage>> {
        Ok(manifest
            .load_split(split, geometry)?
            .into_iter()
            .map(|s| s.image)
            .collect())
    };
    let train_set = to_images(Split::Train)?;
    let test_set = to_images(Split::Test)?;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;

    let rng = Rng::new(cfg.seed);
    let network = Network::from_config(&cfg.network, &rng)?;
    let mut model = PrototypeModel::with_init_range(
        network,
        cfg.model.similarity,
        manifest.classes.len(),
        cfg.model.prototypes_per_class,
        cfg.model.prototype_init_range,
        &rng,
    );
    log::info!(
        "training {} model: {} train images, {} classes, {} prototypes",
        cfg.model.similarity.name(),
        train_set.len(),
        manifest.classes.len(),
        model.prototypes.len()
    );
    let report = train_toy(&mut model, &train_set, &cfg.train_config())?;
    let test_accuracy = if test_set.is_empty() {
        None
    } else {
        Some(accuracy(&model, &test_set)?)
    };
    let train_accuracy = accuracy(&model, &train_set)?;

    let model_path = out.join(MODEL_FILE);
    save_model(&model, &model_path)?;
    let rows: Vec<EpochRow> = report
        .epoch_losses
        .iter()
        .enumerate()
        .map(|(epoch, &loss)| EpochRow { epoch, loss })
        .collect();
    write_rows(&out.join(TRAIN_LOG_FILE), &rows)?;
    let summary = TrainSummary {
        similarity: cfg.model.similarity.name().to_string(),
        classes: manifest.classes.clone(),
        prototypes: model.prototypes.len(),
        train_images: train_set.len(),
        test_images: test_set.len(),
        final_loss: report.epoch_losses.last().copied(),
        train_accuracy,
        test_accuracy,
    };
    let path = out.join(TRAIN_SUMMARY_FILE);
    let mut text = serde_json::to_string_pretty(&summary)?;
    text.push('\n');
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    cfg.save(out)?;
    match test_accuracy {
        Some(acc) => log::info!("test accuracy: {acc:.4} ({} images)", test_set.len()),
        None => log::warn!("manifest has no test split; test accuracy not reported"),
    }
    Ok(TrainOutput { model_path, summary })
}
