use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::prototype::{LabeledImage, PrototypeModel};
use super::similarity::squared_distances;
use crate::error::{Error, Result};
use crate::numerics::{Rng, Tensor};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    /// Multiplier on the learning rate of the feature extractor's weights.
    pub network_lr_scale: f64,
    pub batch_size: usize,
    /// Upper bound on the L2 norm of each mini-batch gradient; `None`
    /// disables clipping.
    pub clip_norm: Option<f64>,
    /// Snap prototypes to their nearest training patches after training.
    pub project: bool,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 30,
            learning_rate: 0.05,
            network_lr_scale: 1.0,
            batch_size: 16,
            clip_norm: Some(1.0),
            project: true,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean cross-entropy per epoch.
    pub epoch_losses: Vec<f64>,
    /// Mean cross-entropy of every mini-batch, measured before its update.
    pub step_losses: Vec<f64>,
    pub train_accuracy: f64,
}

struct ExampleGrad {
    loss: f64,
    network: Vec<Option<Vec<f64>>>,
    prototypes: Vec<Vec<f64>>,
    head: Vec<f64>,
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|z| (z - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// Cross-entropy loss of one example.
pub fn example_loss(model: &PrototypeModel, sample: &LabeledImage) -> Result<f64> {
    let pred = model.predict(&sample.image)?;
    Ok(-softmax(&pred.logits)[sample.label].ln())
}

fn example_grad(model: &PrototypeModel, sample: &LabeledImage) -> Result<ExampleGrad> {
    let (features, trace) = model.network.forward(&sample.image)?;
    let (d, h, w) = features.dims3()?;
    let classes = model.num_classes();
    let np = model.prototypes.len();

    // per-prototype max similarity and its location
    let mut scores = Vec::with_capacity(np);
    let mut where_ = Vec::with_capacity(np);
    for p in &model.prototypes {
        let d2 = squared_distances(&features, &p.vector)?;
        let mut best = 0;
        let mut best_s = f64::NEG_INFINITY;
        for (loc, &v) in d2.data().iter().enumerate() {
            let s = model.kind.score(v);
            if s > best_s {
                best_s = s;
                best = loc;
            }
        }
        scores.push(best_s);
        where_.push((best, d2.data()[best]));
    }
    let logits = model.head.logits(&scores);
    let probs = softmax(&logits);
    let loss = -probs[sample.label].ln();

    let mut dz = probs;
    dz[sample.label] -= 1.0;
    let mut head = vec![0.0; classes * np];
    let mut ds = vec![0.0; np];
    for c in 0..classes {
        for j in 0..np {
            head[c * np + j] = dz[c] * scores[j];
            ds[j] += dz[c] * model.head.weights.data()[c * np + j];
        }
    }

    let plane = h * w;
    let mut seed = vec![0.0; d * plane];
    let mut prototypes = vec![vec![0.0; d]; np];
    for (j, p) in model.prototypes.iter().enumerate() {
        let (loc, d2) = where_[j];
        let g = ds[j] * model.kind.derivative(d2);
        if g == 0.0 {
            continue;
        }
        for ch in 0..d {
            let diff = features.data()[ch * plane + loc] - p.vector[ch];
            seed[ch * plane + loc] += 2.0 * g * diff;
            prototypes[j][ch] = -2.0 * g * diff;
        }
    }
    let seed = Tensor::new(vec![d, h, w], seed)?;
    let grads = model.network.backward(&trace, &seed, true)?;
    Ok(ExampleGrad {
        loss,
        network: grads.params.expect("requested"),
        prototypes,
        head,
    })
}

/// Mini-batch SGD on cross-entropy through head, similarity layer and
/// feature extractor, followed by prototype projection.
pub fn train_toy(model: &mut PrototypeModel, train: &[LabeledImage], cfg: &TrainConfig) -> Result<TrainReport> {
    if train.is_empty() {
        return Err(Error::invalid("empty training set"));
    }
    let classes = model.num_classes();
    if let Some(bad) = train.iter().find(|s| s.label >= classes) {
        return Err(Error::invalid(format!(
            "image {} has label {} but the model has {} classes",
            bad.id, bad.label, classes
        )));
    }
    let rng = Rng::new(cfg.seed);
    let batch = cfg.batch_size.max(1);
    let mut report = TrainReport::default();
    let mut order: Vec<usize> = (0..train.len()).collect();

    for epoch in 0..cfg.epochs {
        order.sort_unstable();
        order.shuffle(&mut rng.stream("train-shuffle", &[epoch as u64]));
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(batch) {
            let grads: Vec<ExampleGrad> = chunk
                .par_iter()
                .map(|&i| example_grad(model, &train[i]))
                .collect::<Result<_>>()?;
            let n = grads.len() as f64;
            let loss = grads.iter().map(|g| g.loss).sum::<f64>() / n;
            if !loss.is_finite() {
                return Err(Error::TrainingDiverged { epoch, loss });
            }
            report.step_losses.push(loss);
            epoch_loss += loss * n;
            let mut step = cfg.learning_rate / n;
            if let Some(limit) = cfg.clip_norm {
                let norm = gradient_norm(&grads) / n;
                if norm > limit {
                    step *= limit / norm;
                }
            }
            apply_step(model, &grads, step, cfg.network_lr_scale);
        }
        let mean = epoch_loss / train.len() as f64;
        log::info!("epoch {epoch}: loss {mean:.5}");
        report.epoch_losses.push(mean);
    }
    if cfg.learning_rate != 0.0 && model.network.layers().iter().any(|l| {
        l.params().is_some_and(|p| p.iter().any(|v| !v.is_finite()))
    }) {
        return Err(Error::TrainingDiverged {
            epoch: cfg.epochs,
            loss: f64::NAN,
        });
    }
    let correct = train
        .par_iter()
        .map(|s| model.predict(&s.image).map(|p| p.class() == s.label))
        .collect::<Result<Vec<bool>>>()?;
    report.train_accuracy = correct.iter().filter(|&&c| c).count() as f64 / train.len() as f64;
    if cfg.project {
        model.project_prototypes(train)?;
    }
    Ok(report)
}

/// L2 norm of the summed gradient of a mini-batch.
fn gradient_norm(grads: &[ExampleGrad]) -> f64 {
    let Some(first) = grads.first() else {
        return 0.0;
    };
    let mut sq = 0.0;
    for (l, layer) in first.network.iter().enumerate() {
        if let Some(len) = layer.as_ref().map(Vec::len) {
            for k in 0..len {
                let v: f64 = grads.iter().map(|g| g.network[l].as_ref().map_or(0.0, |p| p[k])).sum();
                sq += v * v;
            }
        }
    }
    for j in 0..first.prototypes.len() {
        for k in 0..first.prototypes[j].len() {
            let v: f64 = grads.iter().map(|g| g.prototypes[j][k]).sum();
            sq += v * v;
        }
    }
    for k in 0..first.head.len() {
        let v: f64 = grads.iter().map(|g| g.head[k]).sum();
        sq += v * v;
    }
    sq.sqrt()
}

fn apply_step(model: &mut PrototypeModel, grads: &[ExampleGrad], step: f64, network_scale: f64) {
    if step == 0.0 {
        return;
    }
    let net_step = step * network_scale;
    for (l, layer) in model.network.layers_mut().iter_mut().enumerate() {
        if let Some(params) = layer.params_mut() {
            for g in grads {
                if let Some(gl) = &g.network[l] {
                    for (p, d) in params.iter_mut().zip(gl) {
                        *p -= net_step * d;
                    }
                }
            }
        }
    }
    for (j, proto) in model.prototypes.iter_mut().enumerate() {
        for g in grads {
            for (p, d) in proto.vector.iter_mut().zip(&g.prototypes[j]) {
                *p -= step * d;
            }
        }
    }
    for g in grads {
        for (p, d) in model.head.weights.data_mut().iter_mut().zip(&g.head) {
            *p -= step * d;
        }
    }
}

/// Fraction of correctly classified images.
pub fn accuracy(model: &PrototypeModel, set: &[LabeledImage]) -> Result<f64> {
    if set.is_empty() {
        return Ok(0.0);
    }
    let correct = set
        .par_iter()
        .map(|s| model.predict(&s.image).map(|p| p.class() == s.label))
        .collect::<Result<Vec<bool>>>()?;
    Ok(correct.iter().filter(|&&c| c).count() as f64 / set.len() as f64)
}

/// Loss and raw gradients of one example: network layers, prototypes, head.
pub fn example_gradients(
    model: &PrototypeModel,
    sample: &LabeledImage,
) -> Result<(f64, Vec<Option<Vec<f64>>>, Vec<Vec<f64>>, Vec<f64>)> {
    let g = example_grad(model, sample)?;
    Ok((g.loss, g.network, g.prototypes, g.head))
}
