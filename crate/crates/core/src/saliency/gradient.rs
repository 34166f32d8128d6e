use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{postprocess, Method, SaliencyConfig, SaliencyMap, Target};
use crate::error::{Error, Result};
use crate::model::PrototypeModel;
use crate::network::ActivationTrace;
use crate::numerics::{gaussian_blur_5x5, Rng, Tensor};

/// Order of averaging and input multiplication in SmoothGrads ⊙ input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SmoothgradMode {
    /// Mean of the noisy gradients, times the clean image.
    #[default]
    AverageThenMultiply,
    /// Mean over samples of gradient times the noisy image.
    MultiplyThenAverage,
}

/// Seed gradient of one similarity score `s_i^{(h,w)}` w.r.t. the feature map.
pub fn score_seed(model: &PrototypeModel, features: &Tensor, target: Target) -> Result<Tensor> {
    let (d, h, w) = features.dims3()?;
    if target.row >= h || target.col >= w {
        return Err(Error::invalid(format!(
            "target location ({}, {}) outside {}x{} feature map",
            target.row, target.col, h, w
        )));
    }
    let proto = model
        .prototypes
        .get(target.prototype)
        .ok_or_else(|| Error::invalid(format!("no prototype {}", target.prototype)))?;
    let f = features.column(target.row, target.col);
    let d2: f64 = f.iter().zip(&proto.vector).map(|(a, b)| (a - b) * (a - b)).sum();
    let g = model.kind.derivative(d2);
    let mut seed = Tensor::zeros(&[d, h, w]);
    let loc = target.row * w + target.col;
    for ch in 0..d {
        seed.data_mut()[ch * h * w + loc] = 2.0 * g * (f[ch] - proto.vector[ch]);
    }
    Ok(seed)
}

/// Gradient of the target similarity score w.r.t. the raw image.
pub fn score_gradient(model: &PrototypeModel, features: &Tensor, trace: &ActivationTrace, target: Target) -> Result<Tensor> {
    let seed = score_seed(model, features, target)?;
    model.network.input_gradient(trace, &seed)
}

pub fn smoothgrads_input(
    model: &PrototypeModel,
    image: &Tensor,
    target: Target,
    cfg: &SaliencyConfig,
    rng: &Rng,
    key: &[u64],
) -> Result<SaliencyMap> {
    if cfg.smoothgrad_samples < 1 {
        return Err(Error::invalid("SmoothGrads needs at least one sample"));
    }
    let sigma = cfg.smoothgrad_noise * (image.max() - image.min());
    let mut stream = rng.stream("smoothgrads", key);
    let normal = (sigma > 0.0).then(|| Normal::new(0.0, sigma).expect("finite sigma"));
    let mut acc = Tensor::zeros(image.shape());
    for _ in 0..cfg.smoothgrad_samples {
        let noisy = match &normal {
            Some(n) => {
                let mut x = image.clone();
                x.data_mut().iter_mut().for_each(|v| *v += n.sample(&mut stream));
                x
            }
            None => image.clone(),
        };
        let (features, trace) = model.network.forward(&noisy)?;
        let grad = score_gradient(model, &features, &trace, target)?;
        let contrib = match cfg.smoothgrad_mode {
            SmoothgradMode::AverageThenMultiply => grad,
            SmoothgradMode::MultiplyThenAverage => grad.zip_with(&noisy, |g, x| g * x)?,
        };
        for (a, g) in acc.data_mut().iter_mut().zip(contrib.data()) {
            *a += g;
        }
    }
    let n = cfg.smoothgrad_samples as f64;
    let raw = match cfg.smoothgrad_mode {
        SmoothgradMode::AverageThenMultiply => acc.zip_with(image, |g, x| g / n * x)?,
        SmoothgradMode::MultiplyThenAverage => acc.map(|g| g / n),
    };
    Ok(SaliencyMap {
        values: postprocess(&raw, cfg.blur_sigma)?,
        method: Method::SmoothgradsInput,
        target,
    })
}

/// Uniform random baseline, blurred like the gradient methods.
pub fn randgrads(
    image_shape: (usize, usize),
    target: Target,
    cfg: &SaliencyConfig,
    rng: &Rng,
    key: &[u64],
) -> Result<SaliencyMap> {
    let mut stream = rng.stream("randgrads", key);
    let raw = Tensor::from_fn(&[image_shape.0, image_shape.1], |_| stream.random::<f64>());
    Ok(SaliencyMap {
        values: gaussian_blur_5x5(&raw, cfg.blur_sigma)?,
        method: Method::Randgrads,
        target,
    })
}

/// Unblurred uniform draws behind [`randgrads`], for checking the sampler.
pub fn randgrads_raw(image_shape: (usize, usize), rng: &Rng, key: &[u64]) -> Tensor {
    let mut stream = rng.stream("randgrads", key);
    Tensor::from_fn(&[image_shape.0, image_shape.1], |_| stream.random::<f64>())
}
