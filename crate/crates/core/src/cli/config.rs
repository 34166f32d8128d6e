//! Run configuration shared by every command and written next to every
//! output for provenance.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{DeletionConfig, OverlapRegion, IRRELEVANT_BELOW};
use crate::model::{SimilarityKind, TrainConfig};
use crate::network::NetworkConfig;
use crate::saliency::{Method, SaliencyConfig};

pub const RUN_CONFIG_FILE: &str = "run_config.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingSection {
    pub epochs: usize,
    pub learning_rate: f64,
    pub network_lr_scale: f64,
    pub batch_size: usize,
    pub clip_norm: Option<f64>,
}

impl Default for TrainingSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        TrainingSection {
            epochs: t.epochs,
            learning_rate: t.learning_rate,
            network_lr_scale: t.network_lr_scale,
            batch_size: t.batch_size,
            clip_norm: t.clip_norm,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub similarity: SimilarityKind,
    pub prototypes_per_class: usize,
    /// Prototypes start uniform in `[0, prototype_init_range)^D`.
    pub prototype_init_range: f64,
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection {
            similarity: SimilarityKind::default(),
            prototypes_per_class: 2,
            prototype_init_range: 0.3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalSection {
    /// Patches scored per test image.
    pub test_patches: usize,
    pub max_test_images: Option<usize>,
    pub overlap_threshold: f64,
    pub overlap_region: OverlapRegion,
}

impl Default for EvalSection {
    fn default() -> Self {
        EvalSection {
            test_patches: 10,
            max_test_images: None,
            overlap_threshold: IRRELEVANT_BELOW,
            overlap_region: OverlapRegion::CropBox,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub network: NetworkConfig,
    pub model: ModelSection,
    pub training: TrainingSection,
    pub saliency: SaliencyConfig,
    pub methods: Vec<Method>,
    pub deletion: DeletionConfig,
    pub eval: EvalSection,
    pub output: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            network: NetworkConfig::default(),
            model: ModelSection::default(),
            training: TrainingSection::default(),
            saliency: SaliencyConfig::default(),
            methods: Method::ALL.to_vec(),
            deletion: DeletionConfig::default(),
            eval: EvalSection::default(),
            output: None,
        }
    }
}

fn check(ok: bool, what: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("config: {what}")))
    }
}

fn unit(v: f64) -> bool {
    v.is_finite() && v > 0.0 && v <= 1.0
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: RunConfig =
            serde_json::from_str(&text).map_err(|e| Error::input(path, format!("invalid run config: {e}")))?;
        cfg.validate().map_err(|e| Error::input(path, e.to_string()))?;
        Ok(cfg)
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        let path = dir.join(RUN_CONFIG_FILE);
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.training.epochs,
            learning_rate: self.training.learning_rate,
            network_lr_scale: self.training.network_lr_scale,
            batch_size: self.training.batch_size,
            clip_norm: self.training.clip_norm,
            project: true,
            seed: self.seed,
        }
    }

    /// Checks every parameter against its documented range.
    pub fn validate(&self) -> Result<()> {
        let n = &self.network;
        check(n.input_channels > 0 && n.input_size > 0, "network input must be non-empty")?;
        check(!n.channels.is_empty() && n.channels.iter().all(|&c| c > 0), "network channels must be positive")?;
        check(n.kernel % 2 == 1, "network kernel must be odd")?;
        check(
            n.normalization.mean.len() == n.input_channels && n.normalization.std.len() == n.input_channels,
            "normalization needs one mean and std per input channel",
        )?;
        check(n.normalization.std.iter().all(|s| s.is_finite() && *s > 0.0), "normalization std must be positive")?;
        check(n.output_gain.is_finite() && n.output_gain > 0.0, "network output_gain must be positive")?;
        if let SimilarityKind::Protopnet { epsilon } = self.model.similarity {
            check(epsilon.is_finite() && epsilon > 0.0 && epsilon < 1.0, "protopnet epsilon must be in (0, 1)")?;
        }
        check(self.model.prototypes_per_class > 0, "prototypes_per_class must be positive")?;
        check(
            self.model.prototype_init_range.is_finite() && self.model.prototype_init_range > 0.0,
            "prototype_init_range must be positive",
        )?;
        let t = &self.training;
        check(t.batch_size > 0, "batch_size must be positive")?;
        check(t.learning_rate.is_finite() && t.learning_rate >= 0.0, "learning_rate must be non-negative")?;
        check(t.network_lr_scale.is_finite() && t.network_lr_scale >= 0.0, "network_lr_scale must be non-negative")?;
        check(t.clip_norm.is_none_or(|c| c.is_finite() && c > 0.0), "clip_norm must be positive")?;
        let s = &self.saliency;
        check(s.blur_sigma.is_finite() && s.blur_sigma > 0.0, "blur_sigma must be positive")?;
        check(s.smoothgrad_samples > 0, "smoothgrad_samples must be positive")?;
        check(s.smoothgrad_noise.is_finite() && s.smoothgrad_noise >= 0.0, "smoothgrad_noise must be non-negative")?;
        check(s.prp_epsilon.is_finite() && s.prp_epsilon > 0.0, "prp_epsilon must be positive")?;
        check(s.lrp_epsilon.is_finite() && s.lrp_epsilon > 0.0, "lrp_epsilon must be positive")?;
        check(unit(s.top_fraction), "top_fraction must be in (0, 1]")?;
        check((0.0..=100.0).contains(&s.percentile), "percentile must be in [0, 100]")?;
        check(!self.methods.is_empty(), "at least one saliency method is required")?;
        let d = &self.deletion;
        check(unit(d.a_max) && unit(d.erf_scan_max), "deletion ranges must be in (0, 1]")?;
        check(d.step.is_finite() && d.step > 0.0 && d.step <= d.a_max, "deletion step must be in (0, a_max]")?;
        check(d.erf_scan_max >= d.a_max, "erf_scan_max must not be below a_max")?;
        let whole = |x: f64| ((x / d.step) - (x / d.step).round()).abs() < 1e-9;
        check(whole(d.a_max) && whole(d.erf_scan_max), "deletion ranges must be multiples of the step")?;
        check(d.erf_threshold.is_finite() && d.erf_threshold > 0.0, "erf_threshold must be positive")?;
        let e = &self.eval;
        check(e.test_patches > 0, "test_patches must be positive")?;
        check((0.0..=1.0).contains(&e.overlap_threshold), "overlap_threshold must be in [0, 1]")?;
        Ok(())
    }
}
