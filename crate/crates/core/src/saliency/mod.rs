//! Part-visualisation methods. Every method turns a (prototype, location)
//! target on an image into a non-negative saliency map with the image's
//! spatial shape; [`extract_patch`] then thresholds and crops it.

mod export;
mod gradient;
mod patch;
mod prp;
mod upsample;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{gaussian_blur_5x5, CubicConfig, PercentileMethod, Rng, Tensor};

pub use export::{overlay_png, write_saliency_png, write_saliency_raw, read_saliency_raw};
pub use gradient::{randgrads, randgrads_raw, score_gradient, score_seed, smoothgrads_input, SmoothgradMode};
pub use patch::{extract_patch, PartPatch};
pub use prp::{check_conservation, prp, prp_relevance};
pub use upsample::{upsample, UpsampleVariant};

/// Saliency method identifiers, as used on the command line and in CSVs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    UpsampleProtopnet,
    #[serde(rename = "upsample-prototree")]
    UpsampleProtoTree,
    SmoothgradsInput,
    Prp,
    Randgrads,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::UpsampleProtopnet,
        Method::UpsampleProtoTree,
        Method::SmoothgradsInput,
        Method::Prp,
        Method::Randgrads,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Method::UpsampleProtopnet => "upsample-protopnet",
            Method::UpsampleProtoTree => "upsample-prototree",
            Method::SmoothgradsInput => "smoothgrads-input",
            Method::Prp => "prp",
            Method::Randgrads => "randgrads",
        }
    }

    pub fn is_upsampling(&self) -> bool {
        matches!(self, Method::UpsampleProtopnet | Method::UpsampleProtoTree)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| {
                let valid: Vec<&str> = Method::ALL.iter().map(Method::name).collect();
                Error::invalid(format!(
                    "unknown saliency method {s:?}; valid methods: {}",
                    valid.join(", ")
                ))
            })
    }
}

/// The neuron being explained: one prototype's similarity at one location.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Target {
    pub prototype: usize,
    pub row: usize,
    pub col: usize,
}

impl Target {
    pub fn location(&self) -> (usize, usize) {
        (self.row, self.col)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SaliencyMap {
    /// `H0×W0`, non-negative.
    pub values: Tensor,
    pub method: Method,
    pub target: Target,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaliencyConfig {
    pub cubic: CubicConfig,
    pub blur_sigma: f64,
    pub smoothgrad_samples: usize,
    /// Noise standard deviation as a fraction of the image's value range.
    pub smoothgrad_noise: f64,
    pub smoothgrad_mode: SmoothgradMode,
    /// Stabilizer of the similarity-layer relevance rule.
    pub prp_epsilon: f64,
    /// Stabilizer of the LRP-ε rule through convolutions.
    pub lrp_epsilon: f64,
    pub top_fraction: f64,
    pub percentile: f64,
    pub percentile_method: PercentileMethod,
}

impl Default for SaliencyConfig {
    fn default() -> Self {
        SaliencyConfig {
            cubic: CubicConfig::default(),
            blur_sigma: 1.0,
            smoothgrad_samples: 10,
            smoothgrad_noise: 0.2,
            smoothgrad_mode: SmoothgradMode::AverageThenMultiply,
            prp_epsilon: 1e-6,
            lrp_epsilon: 1e-9,
            top_fraction: 0.02,
            percentile: 95.0,
            percentile_method: PercentileMethod::Linear,
        }
    }
}

/// Channel mean, then absolute value, then 5×5 Gaussian blur.
pub fn postprocess(raw: &Tensor, sigma: f64) -> Result<Tensor> {
    let (c, h, w) = raw.dims3()?;
    let plane = h * w;
    let d = raw.data();
    let mean = Tensor::from_fn(&[h, w], |i| {
        (0..c).map(|ch| d[ch * plane + i]).sum::<f64>() / c as f64
    });
    gaussian_blur_5x5(&mean.map(f64::abs), sigma)
}

/// Runs one method end to end on a raw image.
pub fn compute(
    model: &crate::model::PrototypeModel,
    image: &Tensor,
    target: Target,
    method: Method,
    cfg: &SaliencyConfig,
    rng: &Rng,
    key: &[u64],
) -> Result<SaliencyMap> {
    match method {
        Method::UpsampleProtopnet | Method::UpsampleProtoTree => {
            let features = model.network.features(image)?;
            let map = model.similarity_map(&features, target.prototype)?;
            let (_, h0, w0) = image.dims3()?;
            let variant = if method == Method::UpsampleProtopnet {
                UpsampleVariant::Protopnet
            } else {
                UpsampleVariant::Prototree
            };
            upsample(&map, target, (h0, w0), variant, cfg)
        }
        Method::SmoothgradsInput => smoothgrads_input(model, image, target, cfg, rng, key),
        Method::Prp => {
            let (_, trace) = model.network.forward(image)?;
            prp(model, &trace, target, cfg)
        }
        Method::Randgrads => {
            let (_, h0, w0) = image.dims3()?;
            randgrads((h0, w0), target, cfg, rng, key)
        }
    }
}
